import numpy as np
import pytest

from demis.frames import Frame, FrameSequence
from demis.segment import RoiMask


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sequence(rng, w, h, n, name="rand"):
    frames = [Frame(rng.integers(0, 256, (h, w, 3), dtype=np.uint8)) for _ in range(n)]
    return FrameSequence(frames, fps=25, name=name)


def random_masks(rng, w, h, n, p=0.3):
    return [RoiMask(rng.random((h, w)) < p) for _ in range(n)]


def random_adt(rng, max_attack_leaves=12, max_defense_leaves=5):
    """Random attack-defense DAG. Nodes only reference earlier nodes, so it is acyclic."""
    from demis.threat.adt import AND, OR, AdtNode, AttackDefenseTree

    n_att = int(rng.integers(1, max_attack_leaves + 1))
    n_def = int(rng.integers(0, max_defense_leaves + 1))
    nodes: list[AdtNode] = []
    used: set[str] = set()

    def pick(kind, k):
        # prefer nodes nobody points at yet, so most leaves stay reachable
        pool = [n.id for n in nodes if n.kind == kind]
        fresh = [i for i in pool if i not in used]
        src = fresh if len(fresh) >= k and rng.random() < 0.8 else pool
        ids = [str(x) for x in rng.choice(src, size=k, replace=False)]
        used.update(ids)
        return ids

    def count(kind):
        return sum(n.kind == kind for n in nodes)

    leaves = ["attack"] * n_att + ["defense"] * n_def
    rng.shuffle(leaves)
    for kind in leaves:
        nodes.append(AdtNode(f"{kind[0]}{len(nodes)}", "", kind))
        if rng.random() < 0.5:
            for k2 in ("attack", "defense"):
                if count(k2) >= 2 and rng.random() < 0.5:
                    kids = pick(k2, int(rng.integers(2, min(4, count(k2)) + 1)))
                    nodes.append(AdtNode(f"{k2[0]}{len(nodes)}", "", k2,
                                         AND if rng.random() < 0.35 else OR, kids))
        node = nodes[-1]
        other = "defense" if node.kind == "attack" else "attack"
        if count(other) and rng.random() < 0.4:
            node.countermeasures.extend(pick(other, 1))
    for n in nodes:
        n.label = n.id
    top = [n.id for n in nodes if n.kind == "attack" and n.id not in used]
    if not top:
        top = [nodes[0].id] if nodes[0].kind == "attack" else [n.id for n in nodes if n.kind == "attack"][:1]
    root = AdtNode(f"r{len(nodes)}", "root", "attack", AND if rng.random() < 0.2 else OR, top)
    return AttackDefenseTree(nodes + [root], root.id)


# -- acceptance summary: one pass/fail line per criterion ----------------------

_acceptance: list[tuple[str, str, float]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.module.__name__.endswith("test_acceptance"):
        title = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _acceptance.append((title, "PASS" if rep.passed else "FAIL", rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for title, status, secs in sorted(_acceptance, key=lambda r: int(r[0].split()[1].rstrip(":"))):
        terminalreporter.write_line(f"{status}  {title}  ({secs:.2f} s)")
