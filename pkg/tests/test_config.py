import pytest

from trifuse.config import RunConfig, load_config, parse_config
from trifuse.errors import ConfigError

TEXT = """
[dims]
v = 3
q = 2
a = 4
d_v = 6
d_q = 8
d_a = 4
d_z = 12
R = 2

[data]
task = ffoe
n_train = 50
type_mix = 0.5, 0.5

[training]
step_size = 0.1
batch = 16
epochs = 3
seed = 9
alpha = 0.25
temperature = 2
clip_norm = none
normalize = softmax

[paths]
data = some/where
"""


def test_parse_full_config():
    cfg = parse_config(TEXT)
    spec = cfg.data_spec()
    assert spec.channels == (3, 2, 4) and spec.dims == (6, 8, 4) and spec.task == "ffoe"
    assert spec.type_mix == (0.5, 0.5) and spec.n_train == 50
    tc = cfg.train_config()
    assert (tc.d_z, tc.R, tc.batch_size, tc.seed, tc.alpha, tc.temperature) == (12, 2, 16, 9, 0.25, 2.0)
    assert tc.clip_norm is None and tc.normalize == "softmax"
    assert cfg.require_alpha() == 0.25
    assert cfg.paths["data"] == "some/where"


def test_defaults_and_overrides():
    cfg = RunConfig()
    assert cfg.train_config().step_size == 1e-3
    with pytest.raises(ConfigError, match="alpha"):
        cfg.require_alpha()
    cfg2 = cfg.with_overrides("training", seed=5, epochs=None)
    assert cfg2.train_config().seed == 5 and cfg2.train_config().epochs == cfg.train_config().epochs


@pytest.mark.parametrize("text", [
    "[dims]\nd_v = 6\nd_q = 8\nd_a = 4\nR = 4\n",
    "[dims]\nwidth = 3\n",
    "[model]\nx = 1\n",
    "[training]\nepochs = many\n",
    "[training]\nnormalize = sparse\n",
    "[dims]\nd_z = 0\n",
    "no section here\n",
])
def test_rejects_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.ini")


def test_to_dict_is_json_ready():
    import json
    json.dumps(parse_config(TEXT).to_dict())
