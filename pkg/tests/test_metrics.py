import numpy as np
import pytest

from rlsfi import (
    AudioBuffer,
    BeamformerFilters,
    Direction,
    FilterBank,
    FwSegSnrParams,
    SceneSource,
    SceneSpec,
    eval_scenario,
    fwsegsnr,
    fwsegsnr_details,
    speech_shaped_noise,
)
from rlsfi.metrics import write_report_csv, write_summary_csv

FS = 16000.0
LOOK = Direction(90.0, 90.0)


@pytest.fixture()
def speech(rng):
    return 0.1 * speech_shaped_noise(2.0, FS, seed=31)


class TestFwSegSnr:
    def test_identical_signals_hit_clamp_ceiling(self, speech):
        buf = AudioBuffer(FS, speech)
        assert fwsegsnr(buf, buf) == 35.0

    def test_bounded_by_clamp(self, speech, rng):
        ref = AudioBuffer(FS, speech)
        garbage = AudioBuffer(FS, rng.standard_normal(speech.size))
        score = fwsegsnr(ref, garbage)
        assert -10.0 <= score <= 35.0

    def test_strictly_decreasing_noise_sweep(self, speech, rng):
        ref = AudioBuffer(FS, speech)
        scores = []
        for level_db in (-30.0, -20.0, -10.0):
            noise = 10 ** (level_db / 20.0) * rng.standard_normal(speech.size)
            scores.append(fwsegsnr(ref, AudioBuffer(FS, speech + noise)))
        assert scores[0] > scores[1] > scores[2]

    def test_frame_accounting(self, speech):
        buf = AudioBuffer(FS, speech)
        det = fwsegsnr_details(buf, buf)
        frame = round(30e-3 * FS)
        hop = round(frame * 0.25)
        assert det.frames_total == (speech.size - frame) // hop + 1
        assert det.frames_total == det.frames_scored + det.frames_excluded

    def test_silent_frames_excluded(self, speech):
        padded = np.concatenate([np.zeros(8000), speech])
        buf = AudioBuffer(FS, padded)
        det = fwsegsnr_details(buf, buf)
        assert det.frames_excluded > 0
        assert det.score_db == 35.0

    def test_length_mismatch_rejected(self, speech):
        with pytest.raises(ValueError):
            fwsegsnr(AudioBuffer(FS, speech), AudioBuffer(FS, speech[:-1]))

    def test_rate_mismatch_rejected(self, speech):
        with pytest.raises(ValueError):
            fwsegsnr(AudioBuffer(FS, speech), AudioBuffer(8000.0, speech))

    def test_all_silent_rejected(self):
        silent = np.full(int(FS), 1e-7)
        with pytest.raises(ValueError):
            fwsegsnr(AudioBuffer(FS, silent), AudioBuffer(FS, silent))

    def test_zero_reference_rejected(self):
        zero = np.zeros(int(FS))
        with pytest.raises(ValueError):
            fwsegsnr(AudioBuffer(FS, zero), AudioBuffer(FS, zero))

    def test_param_validation(self):
        with pytest.raises(ValueError):
            FwSegSnrParams(frame_ms=0.0)
        with pytest.raises(ValueError):
            FwSegSnrParams(overlap=1.0)
        with pytest.raises(ValueError):
            FwSegSnrParams(clamp_db=(35.0, -10.0))

    def test_parameters_are_overridable(self, speech):
        buf = AudioBuffer(FS, speech)
        p = FwSegSnrParams(frame_ms=20.0, overlap=0.5, num_bands=18, clamp_db=(-5.0, 30.0))
        assert fwsegsnr(buf, buf, p) == 30.0


def tiny_filters(num_mics):
    taps = np.zeros((num_mics, 16))
    taps[:, 0] = 1.0 / num_mics
    return BeamformerFilters(taps, FS)


@pytest.fixture()
def tiny_report(head_geom):
    sig_t = speech_shaped_noise(0.4, FS, seed=1)
    sig_i = speech_shaped_noise(0.4, FS, seed=2)
    scenes = []
    for theta in (90.0, 75.0):
        for phi_ld in (60.0, 90.0):
            for phi_int in (15.0, 165.0):
                scenes.append(
                    SceneSpec(
                        (
                            SceneSource(sig_t, Direction(phi_ld, 90.0)),
                            SceneSource(sig_i, Direction(phi_int, theta)),
                        ),
                        0,
                        0.4,
                    )
                )
    designs = {"das": tiny_filters(head_geom.num_mics)}
    return eval_scenario(designs, scenes, head_geom, FS), scenes


class TestEvalScenario:
    def test_cell_and_group_counts(self, tiny_report):
        report, scenes = tiny_report
        assert len(report.cells) == len(scenes)
        assert len(report.per_target_means()) == 4  # 2 targets x 2 elevations

    def test_averages_recompute_exactly(self, tiny_report):
        report, _ = tiny_report
        for (phi_ld, theta_int), mean_in, mean_out in report.per_target_means():
            members = [
                c for c in report.cells if c.phi_ld == phi_ld and c.theta_int == theta_int
            ]
            assert mean_in == pytest.approx(np.mean([c.input_db for c in members]), abs=1e-12)
            for did, v in mean_out.items():
                assert v == pytest.approx(
                    np.mean([c.output_db[did] for c in members]), abs=1e-12
                )

    def test_permutation_invariance(self, head_geom):
        sig_t = speech_shaped_noise(0.3, FS, seed=1)
        sig_i = speech_shaped_noise(0.3, FS, seed=2)

        def scene(phi_int):
            return SceneSpec(
                (
                    SceneSource(sig_t, LOOK),
                    SceneSource(sig_i, Direction(phi_int, 73.0)),
                ),
                0,
                0.3,
            )

        designs = {"das": tiny_filters(head_geom.num_mics)}
        order_a = [scene(p) for p in (15.0, 75.0, 135.0)]
        order_b = [scene(p) for p in (135.0, 15.0, 75.0)]
        means_a = eval_scenario(designs, order_a, head_geom, FS).per_target_means()
        means_b = eval_scenario(designs, order_b, head_geom, FS).per_target_means()
        assert means_a[0][1] == pytest.approx(means_b[0][1], abs=1e-12)
        assert means_a[0][2]["das"] == pytest.approx(means_b[0][2]["das"], abs=1e-12)

    def test_requires_two_sources(self, head_geom):
        sig = speech_shaped_noise(0.2, FS, seed=1)
        lonely = SceneSpec((SceneSource(sig, LOOK),), 0, 0.2)
        with pytest.raises(ValueError):
            eval_scenario({"das": tiny_filters(head_geom.num_mics)}, [lonely], head_geom, FS)

    def test_filter_bank_lookup(self, head_geom):
        bank = FilterBank({LOOK: tiny_filters(head_geom.num_mics)})
        assert bank.for_direction(LOOK) is not None
        with pytest.raises(KeyError):
            bank.for_direction(Direction(0.0, 90.0))

    def test_csv_outputs(self, tiny_report, tmp_path):
        report, _ = tiny_report
        write_report_csv(tmp_path / "report.csv", report, config_hash="deadbeef")
        write_summary_csv(tmp_path / "summary.csv", report, config_hash="deadbeef")
        lines = (tmp_path / "report.csv").read_text().splitlines()
        assert lines[0] == "# config-hash: deadbeef"
        assert lines[1] == "phi_ld,theta_int,phi_int,design_id,input_db,output_db"
        assert len(lines) == 2 + len(report.cells)
        summary = (tmp_path / "summary.csv").read_text().splitlines()
        assert summary[1] == "phi_ld,theta_int,design_id,mean_input_db,mean_output_db"
