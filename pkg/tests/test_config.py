import pytest
import yaml
from hypothesis import given, settings, strategies as st

from mgdispatch.adp import TrainingConfig
from mgdispatch.config import ConfigError, default_document, dump_config, load_config, parse_config
from mgdispatch.model import MicrogridParams
from mgdispatch.scenarios import PriceSchedule


def _write(tmp_path, doc):
    path = tmp_path / 'c.yaml'
    path.write_text(yaml.safe_dump(doc))
    return path


def test_defaults_match_model_defaults():
    cfg = load_config()
    assert cfg.params == MicrogridParams()
    assert cfg.training == TrainingConfig()
    assert cfg.scenarios.prices == PriceSchedule()
    assert cfg.scenarios.rel_std == (0.10, 0.05, 0.05, 0.05)
    assert cfg.mpc.horizon == 8 and cfg.mpc.terminal_vfa == 'none'
    assert cfg.solver.method == 'auto'


def test_shipped_electric_map_equals_derived_one():
    doc = default_document()
    doc['ccgt']['electric_map'] = None
    assert parse_config(doc).params.electric_map == load_config().params.electric_map


def test_dump_round_trip():
    cfg = load_config()
    assert parse_config(dump_config(cfg)) == cfg
    # and through YAML text
    assert parse_config(yaml.safe_load(yaml.safe_dump(dump_config(cfg)))) == cfg


def test_partial_file_overrides(tmp_path):
    path = _write(tmp_path, {'penalties': {'heat_vent': 2000.0}, 'training': {'iterations': 7}})
    cfg = load_config(path)
    assert cfg.params.penalties.heat_vent == 2000.0
    assert cfg.params.penalties.heat_curtailment == 350.0
    assert cfg.training.iterations == 7
    assert cfg.source == str(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match='not found'):
        load_config(tmp_path / 'absent.yaml')


def test_bad_yaml(tmp_path):
    path = tmp_path / 'c.yaml'
    path.write_text('units: [unclosed')
    with pytest.raises(ConfigError, match='YAML'):
        load_config(path)


@pytest.mark.parametrize('override, field', [
    ({'units': {'gb': {'power_min': 'one'}}}, 'units.gb.power_min'),
    ({'units': {'gb': {'ramp_unit': 'MW/s'}}}, 'units.gb.ramp_unit'),
    ({'units': {'fc': {'power_min': 9.0}}}, 'units.fc'),
    ({'storage': {'eta_charge': 1.5}}, 'storage'),
    ({'training': {'iterations': 2.5}}, 'training.iterations'),
    ({'training': {'stop_on_convergence': 'yes'}}, 'training.stop_on_convergence'),
    ({'mpc': {'forecast': 'oracle'}}, 'mpc.forecast'),
    ({'solver': {'method': 'gurobi'}}, 'solver.method'),
    ({'ccgt': {'arma': {'a': [0.5, 0.1]}}}, 'ccgt.arma.a'),
    ({'scenarios': {'prices': {'tiers': [[1, 'x', 3.0]]}}}, 'scenarios.prices.tiers[0]'),
    ({'scenarios': {'rel_std': {'wind': -0.1}}}, 'scenarios.rel_std'),
    ({'heat_balance': 'peak'}, 'heat_balance'),
    ({'nonsense': 1}, 'nonsense'),
    ({'units': {'fc': {'colour': 'red'}}}, 'units.fc.colour'),
])
def test_errors_name_the_field(override, field):
    with pytest.raises(ConfigError) as exc:
        load_config(overrides=override)
    assert exc.value.field == field
    assert str(exc.value).startswith(field)


def test_unstable_arma_reported_under_its_section():
    with pytest.raises(ConfigError) as exc:
        load_config(overrides={'ccgt': {'arma': {'a': [1.2, 0.0, 0.0, 0.0]},
                                        'electric_map': None}})
    assert exc.value.field == 'ccgt.arma'


def test_relative_profiles_path(tmp_path):
    path = _write(tmp_path, {'scenarios': {'profiles': 'day.csv'}})
    assert load_config(path).scenarios.profiles == str(tmp_path / 'day.csv')


@settings(max_examples=30)
@given(heat_vent=st.floats(0, 1e4), a=st.floats(0.1, 100), horizon=st.integers(1, 96),
       seed=st.integers(0, 2**31), rel=st.floats(0, 0.5))
def test_round_trip_property(heat_vent, a, horizon, seed, rel):
    cfg = load_config(overrides={'penalties': {'heat_vent': heat_vent},
                                 'training': {'stepsize_a': a, 'seed': seed},
                                 'mpc': {'horizon': horizon},
                                 'scenarios': {'rel_std': {'demand_q': rel}}})
    assert parse_config(dump_config(cfg)) == cfg
