import numpy as np
import pytest

from parkmatch import cli, formats
from parkmatch.generators import gen_match_instance, gen_random_tree, gen_search_instance
from parkmatch.rng import make_rng
from parkmatch.tree_metric import WeightedTree

SEARCH = """\
# a small spider
root 0
edge 0 1 1.0
edge 1 2 2.5
edge 0 3 1.0
spot 2
spot 3
spot 1
car 0
kill 2
kill 1
"""

MATCH = """\
root 0
edge 0 1 1.0
edge 1 2 1.0
edge 1 3 2.0
server 0
server 2 2
request 3
request 1
pi 0 0 1.0
pi 1 1 0.5
pi 1 2 0.5
pi 1 3 0.5
pi 2 1 0.5
pi 2 2 0.5
pi 2 3 0.5
"""


def test_parse_search():
    doc = formats.parse(SEARCH)
    assert doc.tree.n == 4 and doc.tree.distance(2, 3) == 4.5
    inst = doc.search_instance()
    assert set(inst.spots) == {1, 2, 3} and inst.start == 0 and inst.kills == (2, 1)
    assert inst.survivor == 3


def test_parse_match_and_pi():
    doc = formats.parse(MATCH)
    assert doc.servers == [0, 2, 2] and doc.requests == [3, 1]
    pi = doc.pi_matrix()
    assert pi.shape == (3, 4)
    assert np.allclose(pi.sum(axis=0), 1)


@pytest.mark.parametrize("text, msg", [
    ("edge 0 1 1\n", "missing 'root'"),
    ("root 0\nedge 0 1 1\nedge 1 2 1\nedge 2 0 1\n", "cycle"),
    ("root 0\nedge 1 2 1\n", "disconnected"),
    ("root 0\nedge 0 1 1\nedge 2 3 1\nedge 3 4 1\nedge 4 2 1\n", "cycle|connected"),
    ("root 0\nedge 0 2 1\n", "no gaps"),
    ("root 0\nedge 0 1 -1\n", "positive"),
    ("root 0\nedge 0 1\n", "takes 3..3"),
    ("root 0\nedge 0 1 x\n", "expected a number"),
    ("root 0\nwarp 1\n", "unknown record"),
    ("root 0\nroot 0\n", "duplicate"),
    ("root 0\nedge 0 1 1\nspot 7\n", "unknown vertex"),
    ("root 0\nedge 0 1 1\ncar -1\n", "negative"),
])
def test_rejects_malformed(text, msg):
    with pytest.raises(formats.FormatError, match=msg):
        formats.parse(text)


def test_pi_errors():
    doc = formats.parse("root 0\nedge 0 1 1\nserver 0\npi 0 0 1\npi 0 0 1\n")
    with pytest.raises(formats.FormatError, match="twice"):
        doc.pi_matrix()
    doc = formats.parse("root 0\nedge 0 1 1\nserver 0\npi 3 0 1\n")
    with pytest.raises(formats.FormatError, match="server 3"):
        doc.pi_matrix()


def test_round_trips():
    g = make_rng(3)
    tree = gen_random_tree(15, g)
    inst = gen_search_instance(tree, g)
    back = formats.parse(formats.dumps(formats.search_lines(inst))).search_instance()
    assert back == inst or (back.spots, back.start, back.kills) == (inst.spots, inst.start, inst.kills)
    assert np.array_equal(back.tree.distance_matrix, tree.distance_matrix)
    servers, requests = gen_match_instance(tree, 6, 3, g)
    pi = np.zeros((6, tree.n))
    pi[0] = 1 / 3
    pi[5] = 2 / 3
    doc = formats.parse(formats.dumps(formats.match_lines(tree, servers, requests) + formats.pi_lines(pi)))
    assert doc.servers == servers and doc.requests == requests
    assert np.array_equal(doc.pi_matrix(), pi)


# -- CLI -----------------------------------------------------------------------

def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path):
    s = tmp_path / "search.txt"
    s.write_text(SEARCH)
    m = tmp_path / "match.txt"
    m.write_text(MATCH)
    return s, m


def test_gen_then_run(capsys, tmp_path):
    code, out, _ = run(capsys, "gen", "search", "--n", "10", "--seed", "4")
    assert code == 0
    path = tmp_path / "g.txt"
    path.write_text(out)
    code, out, _ = run(capsys, "run-search", str(path), "--seed", "4")
    assert code == 0
    assert out.splitlines()[-1].startswith("epsilon=")
    code, out, _ = run(capsys, "gen", "match", "--n", "8", "--k", "5", "--m", "3", "--seed", "1")
    assert out.count("server ") == 5 and out.count("request ") == 3


def test_every_subcommand_runs(capsys, files):
    s, m = files
    for argv in (["build-grove", str(s)], ["run-search", str(s)], ["run-match", str(m)],
                 ["run-grove", str(m)], ["price", str(m)],
                 ["verify", str(s), "--occupancy", "--jumps", "--trials", "2000"],
                 ["verify", str(m), "--monotone", "--marginals", "--distortion", "--trials", "300"],
                 ["experiment", "--instances", "2", "--n", "8", "--trials", "3"]):
        code, out, err = run(capsys, *argv, "--seed", "9")
        assert code == 0, (argv, out, err)
        assert out and not err


def test_price_output(capsys, files):
    _, m = files
    code, out, _ = run(capsys, "price", str(m), "--seed", "0")
    lines = out.splitlines()
    assert lines[0] == "partitions=2 marginal_error=0 marginals_ok=1"
    assert "partition p=0.5" in lines
    assert "part leader=1 members=1,2,3" in lines
    assert any(line.startswith("prices 0=0 1=") and "inf" in line for line in lines)


def test_seed_precedence(capsys, files, monkeypatch):
    s, _ = files
    monkeypatch.setenv("PARKMATCH_SEED", "77")
    _, env_out, _ = run(capsys, "build-grove", str(s))
    _, flag_out, _ = run(capsys, "build-grove", str(s), "--seed", "77")
    assert env_out == flag_out
    code, out, _ = run(capsys, "verify", str(s), "--jumps", "--trials", "500")
    assert "seed=77" in out
    _, other, _ = run(capsys, "verify", str(s), "--jumps", "--trials", "500", "--seed", "5")
    assert "seed=5" in other


def test_reruns_are_byte_identical(capsys, files):
    s, m = files
    for argv in (["run-search", str(s)], ["run-match", str(m)], ["run-grove", str(m)],
                 ["build-grove", str(m)],
                 ["verify", str(s), "--occupancy", "--trials", "1000"]):
        a = run(capsys, *argv, "--seed", "123")
        b = run(capsys, *argv, "--seed", "123")
        assert a == b


def test_bad_input_exits_2(capsys, tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("root 0\nedge 0 1 1\nedge 1 0 1\n")
    code, out, err = run(capsys, "build-grove", str(p))
    assert code == 2 and "cycle" in err
    p.write_text("root 0\nedge 0 1 1\n")
    code, _, err = run(capsys, "run-match", str(p))
    assert code == 2 and "server" in err
    with pytest.raises(SystemExit):
        cli.main(["run-search", str(p), "--seed", "-1"])


def test_non_monotone_pi_is_an_input_error(capsys, tmp_path):
    p = tmp_path / "pi.txt"
    p.write_text("root 0\nedge 0 1 1\nserver 0\nserver 1\npi 0 0 0.2\npi 1 0 0.8\n"
                 "pi 0 1 0.5\npi 1 1 0.5\n")
    code, _, err = run(capsys, "verify", str(p), "--marginals")
    assert code == 2 and "not monotone" in err


def test_failed_check_exits_1(capsys, files, monkeypatch):
    s, _ = files
    real = cli.check_jump_bound

    def broken(*a, **k):
        rep = real(*a, **k)
        rep.passed = False
        return rep

    monkeypatch.setattr(cli, "check_jump_bound", broken)
    code, out, _ = run(capsys, "verify", str(s), "--jumps", "--trials", "100", "--seed", "1")
    assert code == 1 and out.splitlines()[-1] == "result checks=jumps seed=1 pass=0"
