MAX_STR_LEN = 120

SYM_KEY_SIZE = 16
NONCE_SIZE = SYM_KEY_SIZE
AEAD_NONCE_SIZE = 12
AEAD_TAG_SIZE = 16
NONCE_MODULUS = 2 ** (8 * NONCE_SIZE)
APARAM_SIZE = 16
SALT_SIZE = 16
DEFAULT_KDF_ITERATIONS = 20000

# constructors deep, for on-demand composition in the closure
COMPOSITION_DEPTH_CAP = 5
