class SimClock:
    """Simulation time. The bus advances it once per transcript event."""

    def __init__(self):
        self.now = 0

    def advance(self) -> int:
        self.now += 1
        return self.now
