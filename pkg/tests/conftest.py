import pytest

from ghostcheck.simulator import AttackConfig, SceneConfig, generate_scenes, inject_attack


@pytest.fixture(scope="session")
def benign_log():
    return generate_scenes([SceneConfig(seed=s) for s in range(3)])


@pytest.fixture(scope="session")
def attacked_log(benign_log):
    return inject_attack(benign_log, AttackConfig(), seed=1, p_asr=0.97)
