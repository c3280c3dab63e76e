import json

import numpy as np
import pytest

from anomalab import datasets as ds
from anomalab.anomalies import CATEGORIES, category_of
from anomalab.explain import NO_ANOMALY_TEXT
from anomalab.prompts import InstructionSample, parse_values


@pytest.fixture(scope="module")
def eval_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("eval")
    manifest = ds.build_eval_dataset(master_seed=77, out_dir=out)
    return out, manifest


class TestAtomicIO:
    def test_write_creates_parents_and_content(self, tmp_path):
        target = tmp_path / "a" / "b" / "out.txt"
        ds.write_atomic(target, "hello\n")
        assert target.read_text() == "hello\n"

    def test_overwrite_leaves_no_temp_files(self, tmp_path):
        target = tmp_path / "out.txt"
        ds.write_atomic(target, "one")
        ds.write_atomic(target, "two")
        assert target.read_text() == "two"
        assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]

    def test_jsonl_roundtrip(self, tmp_path):
        rows = [{"a": 1}, {"b": [1, 2]}, {"c": "x"}]
        path = tmp_path / "rows.jsonl"
        ds.save_jsonl(path, rows)
        assert ds.load_jsonl(path) == rows

    def test_jsonl_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "rows.jsonl"
        path.write_text('{"a": 1}\n\n{"b": 2}\n')
        assert ds.load_jsonl(path) == [{"a": 1}, {"b": 2}]

    def test_jsonl_error_names_line(self, tmp_path):
        path = tmp_path / "rows.jsonl"
        path.write_text('{"a": 1}\nnot json\n')
        with pytest.raises(ds.DatasetFormatError, match="line 2"):
            ds.load_jsonl(path)

    def test_manifest_roundtrip(self, tmp_path):
        manifest = ds.DatasetManifest(
            kind="eval", sample_count=10, lengths=(100,), master_seed=5,
            samples_per_type=2, categories=CATEGORIES, files=("x.jsonl",))
        path = tmp_path / "manifest.json"
        ds.save_manifest(path, manifest)
        assert ds.load_manifest(path) == manifest


class TestLabeledSamples:
    def test_deterministic(self):
        a, bundle_a = ds.build_labeled_sample(120, seed=9)
        b, bundle_b = ds.build_labeled_sample(120, seed=9)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert a.types == b.types
        assert bundle_a == bundle_b

    def test_category_pinned(self):
        labeled, _ = ds.build_labeled_sample(150, seed=3, category="shape")
        kinds = {t for t in labeled.types if t != "none"}
        assert kinds
        assert all(category_of(k) == "shape" for k in kinds)

    def test_anomaly_free(self):
        labeled, bundle = ds.build_labeled_sample(100, seed=4, anomalies=False)
        assert not labeled.labels.any()
        assert bundle.anomaly_text == NO_ANOMALY_TEXT

    def test_record_schema(self):
        labeled, bundle = ds.build_labeled_sample(100, seed=8)
        row = ds.sample_record(labeled, bundle, seed=8)
        assert set(row) == {
            "values", "labels", "types", "base_explanation",
            "anomaly_explanation", "combined_explanation", "spec", "seed",
        }
        assert len(row["values"]) == len(row["labels"]) == len(row["types"]) == 100
        json.dumps(row)  # fully serializable

    def test_record_includes_rewrite_only_when_set(self):
        from dataclasses import replace
        labeled, bundle = ds.build_labeled_sample(100, seed=8)
        row = ds.sample_record(labeled, replace(bundle, rewritten_text="r"), 8)
        assert row["rewritten_explanation"] == "r"


class TestEvalDataset:
    def test_files_and_manifest(self, eval_dir):
        out, manifest = eval_dir
        assert manifest.kind == "eval"
        assert manifest.sample_count == 300
        assert manifest.files == ("eval_100.jsonl", "eval_200.jsonl",
                                  "eval_400.jsonl")
        assert (out / "manifest.json").is_file()
        assert ds.load_manifest(out / "manifest.json") == manifest

    def test_quotas_and_category_purity(self, eval_dir):
        out, _ = eval_dir
        for length in ds.EVAL_LENGTHS:
            rows = ds.load_jsonl(out / f"eval_{length}.jsonl")
            assert len(rows) == 100
            for i, row in enumerate(rows):
                assert len(row["values"]) == length
                expected_category = CATEGORIES[i // ds.SAMPLES_PER_TYPE]
                kinds = {t for t in row["types"] if t != "none"}
                assert kinds, f"row {i} of eval_{length} has no anomaly"
                assert all(category_of(k) == expected_category for k in kinds)

    def test_labels_match_types(self, eval_dir):
        out, _ = eval_dir
        rows = ds.load_jsonl(out / "eval_100.jsonl")
        for row in rows:
            for label, kind in zip(row["labels"], row["types"]):
                assert (label == 1) == (kind != "none")

    def test_rebuild_is_byte_identical(self, eval_dir, tmp_path):
        out, _ = eval_dir
        ds.build_eval_dataset(master_seed=77, out_dir=tmp_path)
        for name in ("eval_100.jsonl", "manifest.json"):
            assert (tmp_path / name).read_bytes() == (out / name).read_bytes()

    def test_different_seed_changes_data(self, eval_dir, tmp_path):
        out, _ = eval_dir
        ds.build_eval_dataset(master_seed=78, out_dir=tmp_path)
        assert ((tmp_path / "eval_100.jsonl").read_bytes()
                != (out / "eval_100.jsonl").read_bytes())


class TestInstructionDataset:
    def test_rows_parse_and_lengths_legal(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        manifest = ds.build_instruction_dataset(30, master_seed=5, out_path=path)
        rows = ds.load_jsonl(path)
        assert len(rows) == 30
        assert manifest.sample_count == 30
        lengths = set()
        for row in rows:
            sample = InstructionSample.from_dict(row)
            values = parse_values(sample.values_text)
            lengths.add(len(values))
            payload = json.loads(sample.response)
            assert set(payload) == {"anomaly", "reason"}
            assert all(0 <= i < len(values) for i in payload["anomaly"])
            assert sample.values_text in sample.instruction
        assert lengths <= set(ds.INSTRUCTION_LENGTHS)
        assert len(lengths) > 1

    def test_manifest_written_alongside(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        ds.build_instruction_dataset(3, master_seed=5, out_path=path)
        manifest = ds.load_manifest(tmp_path / "inst_manifest.json")
        assert manifest.kind == "instruction"
        assert manifest.allow_no_anomaly is True
        assert manifest.files == ("inst.jsonl",)

    def test_forced_no_anomaly(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        ds.build_instruction_dataset(10, master_seed=5, out_path=path,
                                     no_anomaly_prob=1.0)
        for row in ds.load_jsonl(path):
            payload = json.loads(row["response"])
            assert payload["anomaly"] == []
            assert payload["reason"] == NO_ANOMALY_TEXT

    def test_no_anomaly_disabled(self, tmp_path):
        path = tmp_path / "inst.jsonl"
        ds.build_instruction_dataset(20, master_seed=5, out_path=path,
                                     allow_no_anomaly=False)
        for row in ds.load_jsonl(path):
            assert json.loads(row["response"])["anomaly"]

    def test_samples_independent_of_count(self, tmp_path):
        small = tmp_path / "small.jsonl"
        large = tmp_path / "large.jsonl"
        ds.build_instruction_dataset(5, master_seed=11, out_path=small)
        ds.build_instruction_dataset(10, master_seed=11, out_path=large)
        assert ds.load_jsonl(large)[:5] == ds.load_jsonl(small)

    def test_count_validation(self, tmp_path):
        with pytest.raises(ValueError):
            ds.build_instruction_dataset(0, master_seed=1,
                                         out_path=tmp_path / "x.jsonl")


class TestBenchmarkLoader:
    def _write(self, tmp_path, text):
        path = tmp_path / "series.csv"
        path.write_text(text)
        return path

    def test_with_header(self, tmp_path):
        path = self._write(tmp_path, "value,label\n1.5,0\n2.5,1\n")
        assert ds.load_benchmark_series(path) == ([1.5, 2.5], [0, 1])

    def test_without_header(self, tmp_path):
        path = self._write(tmp_path, "1.5,0\n2.5,1\n")
        assert ds.load_benchmark_series(path) == ([1.5, 2.5], [0, 1])

    def test_float_labels_accepted(self, tmp_path):
        path = self._write(tmp_path, "1.0,0.0\n2.0,1.0\n")
        assert ds.load_benchmark_series(path) == ([1.0, 2.0], [0, 1])

    def test_blank_rows_skipped(self, tmp_path):
        path = self._write(tmp_path, "1.0,0\n\n2.0,1\n")
        assert ds.load_benchmark_series(path)[0] == [1.0, 2.0]

    def test_wrong_column_count(self, tmp_path):
        path = self._write(tmp_path, "1.0,0\n2.0,1,extra\n")
        with pytest.raises(ds.DatasetFormatError, match="line 2"):
            ds.load_benchmark_series(path)

    def test_bad_value(self, tmp_path):
        path = self._write(tmp_path, "1.0,0\noops,1\n")
        with pytest.raises(ds.DatasetFormatError, match="line 2"):
            ds.load_benchmark_series(path)

    def test_non_finite_value(self, tmp_path):
        path = self._write(tmp_path, "1.0,0\ninf,1\n")
        with pytest.raises(ds.DatasetFormatError, match="non-finite"):
            ds.load_benchmark_series(path)

    def test_bad_label(self, tmp_path):
        for bad in ("2", "yes", "0.5", "-1"):
            path = self._write(tmp_path, f"1.0,0\n2.0,{bad}\n")
            with pytest.raises(ds.DatasetFormatError, match="label"):
                ds.load_benchmark_series(path)

    def test_empty_file(self, tmp_path):
        path = self._write(tmp_path, "")
        with pytest.raises(ds.DatasetFormatError, match="no data rows"):
            ds.load_benchmark_series(path)

    def test_header_only(self, tmp_path):
        path = self._write(tmp_path, "value,label\n")
        with pytest.raises(ds.DatasetFormatError, match="no data rows"):
            ds.load_benchmark_series(path)


class TestSegmentation:
    def test_median_window(self):
        series = [
            np.sin(2 * np.pi * 5 * np.arange(500) / 500),   # window 100
            np.sin(2 * np.pi * 10 * np.arange(500) / 500),  # window 50
        ]
        assert ds.median_fft_window(series) == 75

    def test_median_window_skips_short_series(self):
        series = [np.sin(2 * np.pi * 5 * np.arange(500) / 500), np.ones(4)]
        assert ds.median_fft_window(series) == 100

    def test_median_window_all_short(self):
        with pytest.raises(ValueError):
            ds.median_fft_window([np.ones(4)])

    def test_segments_partition_in_lockstep(self):
        values = np.arange(2500, dtype=float)
        labels = (values % 7 == 0).astype(int)
        segments = ds.segment_series(values, labels, median_window=300)
        assert len(segments) == 2
        for k, (v, y) in enumerate(segments):
            assert len(v) == len(y) == 1200
            np.testing.assert_array_equal(v, values[k * 1200:(k + 1) * 1200])
            np.testing.assert_array_equal(y, labels[k * 1200:(k + 1) * 1200])

    def test_short_series_yields_nothing(self, caplog):
        with caplog.at_level("WARNING", logger="anomalab.datasets"):
            out = ds.segment_series(np.ones(1000), np.zeros(1000),
                                    median_window=300)
        assert out == []
        assert any("shorter than one segment" in r.message for r in caplog.records)

    def test_validation(self):
        with pytest.raises(ValueError):
            ds.segment_series(np.ones(10), np.zeros(9), 2)
        with pytest.raises(ValueError):
            ds.segment_series(np.ones(10), np.zeros(10), 0)

    def test_segments_are_copies(self):
        values = np.arange(16, dtype=float)
        segments = ds.segment_series(values, np.zeros(16), median_window=2)
        segments[0][0][:] = -1
        assert values[0] == 0.0

    def test_top_variable_selector(self, rng):
        segments = [(rng.normal(0, s, 50), np.zeros(50)) for s in (1, 5, 3)]
        top2 = ds.select_top_variable_segments(segments, k=2)
        stds = [float(np.std(v)) for v, _ in top2]
        assert stds == sorted(stds, reverse=True)
        assert len(ds.select_top_variable_segments(segments, k=10)) == 3

    def test_top_selector_ties_break_by_index(self):
        seg = (np.array([1.0, -1.0] * 10), np.zeros(20))
        segments = [seg, (seg[0].copy(), seg[1].copy()), seg]
        top = ds.select_top_variable_segments(segments, k=2)
        assert top[0] is segments[0]
        assert top[1] is segments[1]
