"""Sum-of-squares clique relaxations on Paley graphs: character sums, graph matrices,
pseudomoments and a dense SDP solver."""

__version__ = "0.1.0"
