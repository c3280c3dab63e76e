import numpy as np
import pytest

from anomalab import explain
from anomalab.anomalies import AnomalyInsertion, AnomalyPlan
from anomalab.generator import BaseSeriesSpec, SeasonalitySpec, TrendSpec
from anomalab.llm import CompletionResult, LlmConfig


def point(kind, t, direction):
    return AnomalyInsertion(kind=kind, start=t, end=t + 1, direction=direction,
                            magnitude=5.0, offset=1.0 if direction == "spike" else -1.0)


class TestFormatting:
    def test_fmt_num_trims_trailing_zeros(self):
        assert explain._fmt_num(2.0) == "2"
        assert explain._fmt_num(2.5) == "2.5"
        assert explain._fmt_num(0.45) == "0.45"
        assert explain._fmt_num(1.234) == "1.23"
        assert explain._fmt_num(10) == "10"

    def test_fmt_positions(self):
        assert explain._fmt_positions([3, 8, 11]) == "[3, 8, 11]"
        assert explain._fmt_positions([np.int64(2)]) == "[2]"


class TestTrendText:
    def test_none_gives_no_sentence(self):
        assert explain.describe_trend(TrendSpec(kind="none"), 100) is None

    def test_linear_direction(self):
        up = explain.describe_trend(TrendSpec(kind="linear", slope=0.3), 100)
        down = explain.describe_trend(TrendSpec(kind="linear", slope=-0.3), 100)
        assert up == "The time series is going with an increasing trend."
        assert down == "The time series is going with a decreasing trend."

    def test_polynomial_direction_from_gradient(self):
        inc = TrendSpec(kind="polynomial", coefficients=(0.5, 0.3), shift=0.0)
        dec = TrendSpec(kind="polynomial", coefficients=(-0.5, -0.3), shift=2.0)
        mixed = TrendSpec(kind="polynomial", coefficients=(-0.5, 0.9), shift=0.0)
        assert "increasing polynomial" in explain.describe_trend(inc, 100)
        assert "decreasing polynomial" in explain.describe_trend(dec, 100)
        mixed_text = explain.describe_trend(mixed, 100)
        assert mixed_text == "This time series shows polynomial trend."


class TestSeasonalityText:
    def test_none(self):
        out = explain.describe_seasonality(SeasonalitySpec(kind="none"), 100)
        assert out == explain.NO_SEASONALITY_TEXT

    def test_single_sine_counts_period_points(self):
        spec = SeasonalitySpec(kind="single_sine", amplitude=2.0, frequency=4,
                               phase=0.0)
        out = explain.describe_seasonality(spec, 100)
        assert "4 periods" in out
        assert "approximately every 25 points" in out

    def test_square_sine_lists_each_harmonic(self):
        spec = SeasonalitySpec(kind="square_sine", frequency=2, harmonics=2)
        out = explain.describe_seasonality(spec, 120)
        assert "include 2 periods with each last for approximately every 60 points" in out
        assert "include 6 periods with each last for approximately every 20 points" in out
        assert out.endswith("points.")

    def test_ifft_lists_bins(self):
        spec = SeasonalitySpec(kind="ifft", bins=(2, 5, 9),
                               bin_amplitudes=(1.0, 1.1, 0.9))
        out = explain.describe_seasonality(spec, 100)
        assert "Fourier Transform" in out
        assert "prominent frequencies at 2, 5, 9." in out


class TestBaseText:
    def test_sentence_order(self):
        spec = BaseSeriesSpec(
            length=100,
            seasonality=SeasonalitySpec(kind="single_sine", amplitude=1.5,
                                        frequency=5, phase=0.0),
            trend=TrendSpec(kind="linear", slope=0.5),
            trend_amplitude=2.0, noise_amplitude=1.0, seed=0)
        out = explain.describe_base(spec)
        trend_pos = out.index("increasing trend")
        season_pos = out.index("seasonal patterns")
        noise_pos = out.index("normal distributed noises")
        assert trend_pos < season_pos < noise_pos
        assert out.endswith(explain.NOISE_TEXT)

    def test_no_trend_sentence_when_none(self):
        spec = BaseSeriesSpec(
            length=100,
            seasonality=SeasonalitySpec(kind="single_sine", amplitude=1.5,
                                        frequency=5, phase=0.0),
            trend=TrendSpec(kind="none"),
            trend_amplitude=2.0, noise_amplitude=1.0, seed=0)
        out = explain.describe_base(spec)
        assert "trend" not in out


class TestAnomalyText:
    def test_empty_plan(self):
        plan = AnomalyPlan(length=50)
        assert explain.describe_anomalies(plan, 50) == explain.NO_ANOMALY_TEXT

    def test_global_spikes_only(self):
        plan = AnomalyPlan(50, (point("global_point", 3, "spike"),
                                point("global_point", 8, "spike")))
        out = explain.describe_anomalies(plan, 50)
        assert "point-based global anomalies" in out
        assert "the positions are [3, 8]" in out
        assert out.endswith("with significant spikes compared to the rest of the time series.")

    def test_global_dips_only(self):
        plan = AnomalyPlan(50, (point("global_point", 5, "dip"),))
        out = explain.describe_anomalies(plan, 50)
        assert "the positions are [5]" in out
        assert "significant dips compared" in out

    def test_global_mixed_directions(self):
        plan = AnomalyPlan(50, (point("global_point", 3, "spike"),
                                point("global_point", 8, "dip")))
        out = explain.describe_anomalies(plan, 50)
        assert "spikes in positions [3]" in out
        assert "dips in positions [8]" in out

    def test_local_head_mentions_surroundings(self):
        plan = AnomalyPlan(50, (point("local_point", 7, "spike"),))
        out = explain.describe_anomalies(plan, 50)
        assert "point-based local anomalies" in out
        assert "surrounding values" in out
        assert "positions are [7]" in out

    def test_point_group_merges_into_one_clause(self):
        plan = AnomalyPlan(50, (point("global_point", 3, "spike"),
                                point("global_point", 9, "spike"),
                                point("global_point", 20, "spike")))
        out = explain.describe_anomalies(plan, 50)
        assert out.count("point-based global anomalies") == 1
        assert "[3, 9, 20]" in out

    def test_amplitude_larger(self):
        ins = AnomalyInsertion(kind="seasonality_amplitude", start=10, end=30,
                               direction="larger", magnitude=2.5)
        out = explain.describe_anomalies(AnomalyPlan(50, (ins,)), 50)
        assert "changes to larger values between indexes 10 to 29" in out
        assert "about 2.5 times about the original values." in out

    def test_amplitude_smaller(self):
        ins = AnomalyInsertion(kind="seasonality_amplitude", start=10, end=30,
                               direction="smaller", magnitude=0.5)
        out = explain.describe_anomalies(AnomalyPlan(50, (ins,)), 50)
        assert "changes to smaller values" in out
        assert "about 0.5 of the original values." in out

    def test_period_change(self):
        ins = AnomalyInsertion(kind="seasonality_period", start=12, end=40,
                               direction="shorter", magnitude=2.0)
        out = explain.describe_anomalies(AnomalyPlan(50, (ins,)), 50)
        assert "period change between indexes 12 and 39" in out
        assert "changes to a shorter period." in out

    def test_trend_change_quotes_offset(self):
        ins = AnomalyInsertion(kind="trend_change", start=25, end=50,
                               direction="increase", magnitude=2.0, offset=7.0)
        out = explain.describe_anomalies(AnomalyPlan(50, (ins,)), 50)
        assert "change point at index 25" in out
        assert "increases by 7." in out

    def test_trend_break_wording(self):
        up = AnomalyInsertion(kind="trend_break", start=10, end=20,
                              direction="increase", magnitude=2.0, offset=5.0)
        down = AnomalyInsertion(kind="trend_break", start=30, end=40,
                                direction="decrease", magnitude=2.0, offset=-5.0)
        out = explain.describe_anomalies(AnomalyPlan(50, (up, down)), 50)
        assert "significant value increase since index 10" in out
        assert "drop back to the original trend since index 19" in out
        assert "significant value decrease since index 30" in out
        assert "increase back to the original trend since index 39" in out

    def test_shape_change_embeds_replacement_description(self):
        repl = SeasonalitySpec(kind="ifft", bins=(3, 7), bin_amplitudes=(1.0, 1.0))
        ins = AnomalyInsertion(kind="shape_change", start=20, end=50,
                               replacement=repl)
        out = explain.describe_anomalies(AnomalyPlan(50, (ins,)), 50)
        assert "change since the index 20" in out
        assert "prominent frequencies at 3, 7" in out
        # embedded sentence loses its period, the clause supplies one
        assert "7.." not in out

    def test_shape_break_embeds_replacement_description(self):
        repl = SeasonalitySpec(kind="single_sine", amplitude=1.0, frequency=2,
                               phase=0.0)
        ins = AnomalyInsertion(kind="shape_break", start=15, end=35,
                               replacement=repl)
        out = explain.describe_anomalies(AnomalyPlan(50, (ins,)), 50)
        assert "between the index 15 and the 34" in out
        assert "2 periods" in out

    def test_mixed_plan_emits_clause_per_insertion(self):
        ins = (point("global_point", 2, "spike"),
               AnomalyInsertion(kind="trend_break", start=10, end=20,
                                direction="increase", magnitude=2.0, offset=3.0),
               AnomalyInsertion(kind="seasonality_period", start=25, end=45,
                                direction="longer", magnitude=2.0))
        out = explain.describe_anomalies(AnomalyPlan(50, ins), 50)
        assert "global anomalies" in out
        assert "value increase" in out
        assert "longer period" in out


class TestBundle:
    def test_combined_is_concatenation(self):
        spec = BaseSeriesSpec(
            length=60,
            seasonality=SeasonalitySpec(kind="single_sine", amplitude=2.0,
                                        frequency=3, phase=0.1),
            trend=TrendSpec(kind="none"),
            trend_amplitude=1.5, noise_amplitude=1.5, seed=9)
        from anomalab.anomalies import LabeledSeries
        plan = AnomalyPlan(60, (point("global_point", 5, "spike"),))
        labeled = LabeledSeries(values=np.zeros(60), labels=np.zeros(60, np.int8),
                                types=["none"] * 60, spec=spec, plan=plan)
        bundle = explain.build_bundle(labeled)
        assert bundle.combined_text == bundle.base_text + " " + bundle.anomaly_text
        assert bundle.rewritten_text is None


class _FakeClient:
    def __init__(self, text, attempts=1):
        self._result = CompletionResult(text=text, attempts=attempts)
        self.prompts = []

    def complete(self, prompt):
        self.prompts.append(prompt)
        return self._result


class TestRewrite:
    def _bundle(self):
        return explain.ExplanationBundle(base_text="b", anomaly_text="a",
                                         combined_text="b a")

    def test_success_sets_rewritten_text(self):
        client = _FakeClient("  A nicer description.  ")
        cfg = LlmConfig(endpoint="http://example.invalid/v1", api_key_env=None)
        out = explain.rewrite_via_llm(self._bundle(), cfg, client=client)
        assert out.rewritten_text == "A nicer description."
        assert "b a" in client.prompts[0]

    def test_failure_returns_bundle_unchanged(self, caplog):
        client = _FakeClient(None, attempts=5)
        cfg = LlmConfig(endpoint="http://example.invalid/v1", api_key_env=None)
        bundle = self._bundle()
        with caplog.at_level("WARNING", logger="anomalab.explain"):
            out = explain.rewrite_via_llm(bundle, cfg, client=client)
        assert out is bundle
        assert out.rewritten_text is None
        assert any("rewrite failed" in r.message for r in caplog.records)

    def test_blank_completion_counts_as_failure(self):
        client = _FakeClient("   ")
        cfg = LlmConfig(endpoint="http://example.invalid/v1", api_key_env=None)
        bundle = self._bundle()
        assert explain.rewrite_via_llm(bundle, cfg, client=client) is bundle

    def test_empty_combined_text_rejected(self):
        bundle = explain.ExplanationBundle(base_text="", anomaly_text="",
                                           combined_text="")
        cfg = LlmConfig(endpoint="http://example.invalid/v1", api_key_env=None)
        with pytest.raises(ValueError):
            explain.rewrite_via_llm(bundle, cfg, client=_FakeClient("x"))
