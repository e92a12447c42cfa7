import random

from causalreg import Dag


def random_dag(rng: random.Random, n_nodes: int, edge_prob: float = 0.5) -> Dag:
    """Random DAG over N0..Nk with edges oriented along a shuffled order."""
    names = [f"N{i}" for i in range(n_nodes)]
    order = names[:]
    rng.shuffle(order)
    edges = []
    for j in range(1, n_nodes):
        for i in range(j):
            if rng.random() < edge_prob:
                edges.append((order[i], order[j]))
    return Dag(names, edges)
