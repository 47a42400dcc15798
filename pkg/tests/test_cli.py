import json

import pandas as pd
import pytest

from pkgrelax.cli import build_parser, main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_feasible(capsys, meal_files) -> None:
    data, query = meal_files
    code, out, _ = _run(capsys, "solve", "--data", str(data), "--query", str(query), "--json")
    assert code == 0
    document = json.loads(out)
    assert document["status"] == "feasible"
    assert document["package"] == [0, 3, 4]
    assert document["objective_value"] == 80.0
    assert [c["satisfied"] for c in document["constraints"]] == [True] * 4


def test_solve_human_output(capsys, meal_files) -> None:
    data, query = meal_files
    code, out, _ = _run(capsys, "solve", "--data", str(data), "--query", str(query))
    assert code == 0
    assert "[0, 3, 4]" in out
    assert "sum(calories) >= 1500" in out


def test_solve_infeasible(capsys, tmp_path, meal_files) -> None:
    data, _ = meal_files
    query = tmp_path / "impossible.json"
    query.write_text(
        json.dumps(
            {
                "objective": {"direction": "maximize", "attr": "calories"},
                "constraints": [{"kind": "cardinality", "op": ">=", "value": 50}],
            }
        )
    )
    code, out, _ = _run(capsys, "solve", "--data", str(data), "--query", str(query), "--json")
    assert code == 3
    document = json.loads(out)
    assert document["status"] == "infeasible"
    assert document["package"] == []


def test_malformed_csv_names_the_row(capsys, tmp_path, meal_files) -> None:
    _, query = meal_files
    data = tmp_path / "bad.csv"
    data.write_text("id,calories,cholesterol,prep_time\n0,400,40,10\n1,five hundred,65,25\n")
    code, _, err = _run(capsys, "solve", "--data", str(data), "--query", str(query))
    assert code == 2
    assert "row 3" in err
    assert "❌" in err


def test_unknown_attribute_exits_2(capsys, tmp_path, meal_files) -> None:
    data, _ = meal_files
    query = tmp_path / "q.json"
    query.write_text(json.dumps({"objective": {"direction": "maximize", "attr": "sodium"}}))
    code, _, err = _run(capsys, "solve", "--data", str(data), "--query", str(query))
    assert code == 2
    assert "sodium" in err


def test_missing_file_exits_2(capsys, tmp_path, meal_files) -> None:
    _, query = meal_files
    code, _, _ = _run(capsys, "solve", "--data", str(tmp_path / "nope.csv"), "--query", str(query))
    assert code == 2


def test_relax_removes_by_rounding_rule(capsys, tmp_path) -> None:
    data = tmp_path / "items.csv"
    data.write_text("id,v,w\n0,5,1\n1,4,2\n2,3,3\n3,2,4\n4,1,5\n")
    query = tmp_path / "q.json"
    query.write_text(
        json.dumps(
            {
                "objective": {"direction": "maximize", "attr": "v"},
                "constraints": [
                    {"kind": "cardinality", "between": [1, 2]},
                    {"kind": "global", "attr": "w", "op": "<=", "value": 6},
                    {"kind": "base", "attr": "w", "op": ">=", "value": 2},
                    {"kind": "base", "attr": "v", "op": "<=", "value": 4},
                ],
            }
        )
    )
    code, out, _ = _run(
        capsys, "relax", "--data", str(data), "--query", str(query),
        "--method", "greedy-ie", "--level", "20", "--json",
    )
    assert code == 0
    document = json.loads(out)
    assert len(document["removed"]) == 1
    assert set(document["removed"][0]) == {"index", "constraint"}
    assert document["solver_calls"] == 5


def test_relax_level_zero(capsys, meal_files) -> None:
    data, query = meal_files
    code, out, _ = _run(
        capsys, "relax", "--data", str(data), "--query", str(query), "--method", "exhaustive-ie", "--level", "0"
    )
    assert code == 0
    assert "Removed: (nothing)" in out
    assert "score=1 " in out


def test_relax_optimal(capsys, meal_files) -> None:
    data, query = meal_files
    code, out, _ = _run(capsys, "relax", "--data", str(data), "--query", str(query), "--optimal", "--json")
    assert code == 0
    document = json.loads(out)
    assert document["method"] == "optimal"
    assert document["solver_calls"] == 15


def test_relax_optimal_capacity_exits_4(capsys, meal_files, monkeypatch) -> None:
    from pkgrelax.config import settings

    monkeypatch.setattr(settings, "optimal_enumeration_cap", 2)
    data, query = meal_files
    code, _, err = _run(capsys, "relax", "--data", str(data), "--query", str(query), "--optimal")
    assert code == 4
    assert "cap" in err


def test_relax_random_trials(capsys, meal_files) -> None:
    data, query = meal_files
    code, out, _ = _run(
        capsys, "relax", "--data", str(data), "--query", str(query),
        "--method", "random", "--level", "50", "--trials", "3", "--seed", "2", "--json",
    )
    assert code == 0
    document = json.loads(out)
    assert len(document["trials"]) == 3
    assert all(len(t["removed"]) == 2 for t in document["trials"])


def test_relax_argument_errors(capsys, meal_files) -> None:
    data, query = meal_files
    base = ["relax", "--data", str(data), "--query", str(query)]
    for extra in (
        ["--method", "greedy-i"],
        ["--method", "greedy-i", "--level", "20", "--optimal"],
        ["--method", "greedy-i", "--level", "101"],
        ["--method", "greedy-i", "--level", "20", "--weights", "meal=2"],
        ["--level", "20"],
        ["--method", "annealing", "--level", "20"],
    ):
        with pytest.raises(SystemExit) as info:
            main(base + extra)
        assert info.value.code == 2


def test_relax_weights(capsys, meal_files) -> None:
    data, query = meal_files
    code, out, _ = _run(
        capsys, "relax", "--data", str(data), "--query", str(query),
        "--method", "greedy-i", "--level", "25", "--weights", "global=0.001", "--json",
    )
    assert code == 0
    assert json.loads(out)["removed"][0]["index"] == 0


def test_recommend(capsys, meal_files) -> None:
    data, query = meal_files
    code, out, _ = _run(capsys, "recommend", "--data", str(data), "--query", str(query), "--json", "--random-plan")
    assert code == 0
    labels = [plan["label"] for plan in json.loads(out)]
    assert [label for label in labels if label != "random"][:2] == ["global-relax", "base-relax"]
    assert "random" in labels


def test_gen(capsys, tmp_path) -> None:
    spec = tmp_path / "spec.json"
    spec.write_text(
        json.dumps(
            {"n_items": 6, "seed": 3, "attributes": [{"name": "x", "distribution": {"kind": "uniform", "lo": 0, "hi": 1}}]}
        )
    )
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run(capsys, "gen", "--spec", str(spec), "--out", str(first))[0] == 0
    assert _run(capsys, "gen", "--spec", str(spec), "--out", str(second))[0] == 0
    assert first.read_bytes() == second.read_bytes()
    assert len(pd.read_csv(first)) == 6


def test_gen_empty_table_is_header_only(capsys, tmp_path) -> None:
    spec = tmp_path / "spec.json"
    spec.write_text(
        json.dumps({"n_items": 0, "attributes": [{"name": "x", "distribution": {"kind": "normal", "mean": 1, "sd": 1}}]})
    )
    out = tmp_path / "empty.csv"
    assert _run(capsys, "gen", "--spec", str(spec), "--out", str(out))[0] == 0
    assert out.read_text().strip() == "id,x"


def test_gen_invalid_distribution_exits_2(capsys, tmp_path) -> None:
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_items": 2, "attributes": [{"name": "x", "distribution": {"kind": "pareto"}}]}))
    code, _, err = _run(capsys, "gen", "--spec", str(spec), "--out", str(tmp_path / "x.csv"))
    assert code == 2
    assert "❌" in err


def test_bench(capsys, tmp_path) -> None:
    spec = tmp_path / "workload.json"
    spec.write_text(
        json.dumps(
            {
                "n_queries": 2,
                "constraints_max": 4,
                "dataset": {
                    "n_items": 12,
                    "seed": 1,
                    "attributes": [
                        {"name": "v", "distribution": {"kind": "uniform", "lo": 1, "hi": 10}},
                        {"name": "w", "distribution": {"kind": "uniform", "lo": 1, "hi": 10}},
                    ],
                },
                "levels": [0],
                "methods": ["greedy-i", "exhaustive-i"],
            }
        )
    )
    code, out, _ = _run(capsys, "bench", "--spec", str(spec), "--out", str(tmp_path / "out"))
    assert code == 0
    assert "curves:" in out
    curves = pd.read_csv(tmp_path / "out" / "curves.csv")
    assert list(curves["level"]) == [0, 0]
    assert (curves["mean_improvement"] == 0).all() and (curves["mean_error"] == 0).all()


def test_bench_generation_failure_exits_5(capsys, tmp_path) -> None:
    spec = tmp_path / "workload.json"
    spec.write_text(
        json.dumps({"n_queries": 1, "dataset": {"n_items": 0, "attributes": []}, "levels": [0]})
    )
    code, _, err = _run(capsys, "bench", "--spec", str(spec), "--out", str(tmp_path / "out"))
    assert code == 5
    assert "❌" in err


def test_parser_has_every_subcommand() -> None:
    parser = build_parser()
    for command in ("solve", "relax", "bench", "gen", "recommend"):
        args = parser.parse_args([command] + _required(command))
        assert args.command == command


def _required(command: str):
    if command in ("solve", "recommend"):
        return ["--data", "d.csv", "--query", "q.json"]
    if command == "relax":
        return ["--data", "d.csv", "--query", "q.json", "--optimal"]
    if command == "gen":
        return ["--spec", "s.json", "--out", "o.csv"]
    return ["--spec", "s.json"]


def test_non_utf8_inputs_exit_2(capsys, tmp_path, meal_files) -> None:
    data, query = meal_files
    bad_data = tmp_path / "latin1.csv"
    bad_data.write_bytes(b"id,calories\n0,4\xff0\n")
    code, _, err = _run(capsys, "solve", "--data", str(bad_data), "--query", str(query))
    assert code == 2
    assert "UTF-8" in err

    bad_query = tmp_path / "latin1.json"
    bad_query.write_bytes(b'{"objective": {"direction": "maximize", "attr": "calories\xff"}}')
    code, _, err = _run(capsys, "solve", "--data", str(data), "--query", str(bad_query))
    assert code == 2
    assert "UTF-8" in err


def test_gen_rejects_bad_seed_and_non_finite_parameters(capsys, tmp_path) -> None:
    spec = tmp_path / "spec.json"
    out = tmp_path / "x.csv"
    uniform = {"name": "x", "distribution": {"kind": "uniform", "lo": 0, "hi": 1}}

    spec.write_text(json.dumps({"n_items": 2, "seed": -1, "attributes": [uniform]}))
    assert _run(capsys, "gen", "--spec", str(spec), "--out", str(out))[0] == 2

    spec.write_text('{"n_items": 2, "attributes": [{"name": "x", "distribution": {"kind": "normal", "mean": NaN, "sd": 1}}]}')
    assert _run(capsys, "gen", "--spec", str(spec), "--out", str(out))[0] == 2
    assert not out.exists()


def test_bench_rejects_negative_seed(capsys, tmp_path) -> None:
    spec = tmp_path / "workload.json"
    spec.write_text(json.dumps({"n_queries": 1, "levels": [0], "seed": -3}))
    code, _, err = _run(capsys, "bench", "--spec", str(spec), "--out", str(tmp_path / "out"))
    assert code == 2
    assert "seed" in err


def test_relax_rejects_negative_seed(capsys, meal_files) -> None:
    data, query = meal_files
    with pytest.raises(SystemExit) as info:
        main(["relax", "--data", str(data), "--query", str(query), "--method", "random", "--level", "50", "--seed", "-1"])
    assert info.value.code == 2
