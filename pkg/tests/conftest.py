import numpy as np
import pytest

from mmgzsl.dataio import SyntheticSpec, generate_synthetic
from mmgzsl.synth import SynthTrainConfig, draw_batch, init_cvae
from mmgzsl.transform import CycleTrainConfig, init_cycle


@pytest.fixture(scope="session")
def small_data():
    """Five ordered classes in 6 dimensions, 10 samples each."""
    return generate_synthetic(SyntheticSpec(dim=6, samples_per_class=10, seed=3))


@pytest.fixture
def tiny_cycle(small_data):
    cfg = CycleTrainConfig(generator_hidden=7, discriminator_hidden=5, init_stddev=0.5)
    return init_cycle(6, 6, cfg, mri=small_data.mri.features, dp=small_data.dp.features)


@pytest.fixture
def tiny_synth_config():
    return SynthTrainConfig(latent_dim=3, encoder_hidden=(7, 5), generator_hidden=(6,),
                            regressor_hidden=(5,), init_stddev=0.5, batch_size=12)


@pytest.fixture
def tiny_cvae(small_data, tiny_synth_config):
    return init_cvae(6, (1, 5), tiny_synth_config, features=small_data.mri.features)


@pytest.fixture
def frozen_batch(small_data, tiny_cvae, tiny_synth_config):
    """All stochastic draws of one synthesis step, fixed."""
    x, c = small_data.mri.features, small_data.mri.classes
    seen = np.isin(c, [1, 3, 5])
    xs, cs = x[seen], c[seen]
    reference = {int(k): xs[cs == k] for k in np.unique(cs)}
    rng = np.random.default_rng(11)
    return draw_batch(tiny_cvae, xs[:12], cs[:12].astype(float), xs, cs, reference,
                      tiny_synth_config, [1.0, 3.0, 5.0], rng)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one summary line per acceptance criterion."""
    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
