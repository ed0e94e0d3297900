import pytest
from fastapi.testclient import TestClient

from decoupler import app as app_module
from decoupler.app import app

client = TestClient(app)

ECHO = {'mode': 'analytic', 'sequence': {'type': 'se'}, 'sweep': {'t_min_us': 0.2, 't_max_us': 8.0, 'points': 30}}


@pytest.fixture(autouse=True)
def _output_root(monkeypatch, tmp_path):
    monkeypatch.setattr(app_module, 'output_root', lambda: tmp_path)
    return tmp_path


def test_health():
    response = client.get('/health')
    assert response.status_code == 200
    assert response.json() == {'status': 'ok'}


def test_sequence_preview():
    response = client.post('/sequences/preview', json={'type': 'cpmg', 'n': 4, 't_us': 10.0})
    assert response.status_code == 200
    body = response.json()
    assert [p['time_us'] for p in body['sequence']['pulses']] == pytest.approx([1.25, 3.75, 6.25, 8.75])
    assert body['sequence']['label'] == 'cpmg4'
    assert body['validation']['ok'] is True


def test_sequence_preview_reports_gap_violations():
    response = client.post('/sequences/preview', json={'type': 'cpmg', 'n': 4, 't_us': 10.0, 'min_gap_us': 5.0})
    assert response.status_code == 200
    validation = response.json()['validation']
    assert validation['ok'] is False
    assert {v['kind'] for v in validation['violations']} == {'gap'}
    assert len(validation['violations']) == 3


def test_sequence_preview_needs_total_time():
    assert client.post('/sequences/preview', json={'type': 'cpmg', 'n': 4}).status_code == 422
    assert client.post('/sequences/preview', json={'type': 'cpmg', 'n': 0, 't_us': 1.0}).status_code == 422


def test_analytic_decay():
    response = client.post(
        '/analytic/decay',
        json={'sequence': {'type': 'se'}, 'sweep': {'t_min_us': 0.1, 't_max_us': 10.0, 'points': 100}},
    )
    assert response.status_code == 200
    body = response.json()
    assert len(body['curve']) == 100
    assert body['T2_us'] == pytest.approx(2.850, abs=2e-3)
    assert body['predicted_T_coh_us'] == pytest.approx(body['T2_us'])
    assert body['one_over_e_us'] == pytest.approx(2.85, rel=0.05)


def test_analytic_decay_without_crossing():
    response = client.post(
        '/analytic/decay',
        json={'sequence': {'type': 'cpmg', 'n': 16}, 'sweep': {'t_min_us': 0.1, 't_max_us': 2.0, 'points': 10}},
    )
    assert response.status_code == 200
    assert response.json()['one_over_e_us'] is None


def test_run_without_registry(_output_root):
    response = client.post('/runs', json={'config': ECHO})
    assert response.status_code == 200
    body = response.json()
    assert body['run_id'] is None
    assert body['summary']['task'] == 'decay'
    assert (_output_root / body['out_dir'].split('/')[-1] / 'decay_analytic.csv').exists()
    assert client.get('/runs').status_code == 503


def test_runs_are_registered(registry):
    created = client.post('/runs', json={'config': ECHO, 'seed': 5})
    assert created.status_code == 200
    run_id = created.json()['run_id']

    listed = client.get('/runs').json()['runs']
    assert [r['id'] for r in listed] == [run_id]
    assert client.get('/runs', params={'task': 'qpt'}).json()['runs'] == []

    run = client.get(f'/runs/{run_id}').json()['run']
    assert run['status'] == 'succeeded'
    assert run['exit_code'] == 0
    assert run['seed'] == 5
    assert run['summary']['curves']['analytic']['label'] == 'se'


def test_failed_run_is_registered(registry):
    response = client.post('/runs', json={'config': {**ECHO, 'task': 'scaling'}})
    assert response.status_code == 422
    (run,) = client.get('/runs').json()['runs']
    assert run['status'] == 'failed'
    assert run['exit_code'] == 2
    assert 'scaling needs' in run['error']


def test_unexpected_failure_is_registered(registry, monkeypatch):
    def explode(cfg, out_dir, ctx):
        raise RuntimeError('out of memory')

    monkeypatch.setattr(app_module, 'run_task', explode)
    with pytest.raises(RuntimeError):
        client.post('/runs', json={'config': ECHO})
    (run,) = client.get('/runs').json()['runs']
    assert run['status'] == 'failed'
    assert run['exit_code'] == 1
    assert run['error'] == 'RuntimeError: out of memory'


def test_unknown_run(registry):
    response = client.get('/runs/does-not-exist')
    assert response.status_code == 404
    assert response.json()['detail'] == 'Run not found'


def test_invalid_run_request():
    assert client.post('/runs', json={'config': {'colour': 'red'}}).status_code == 422
    assert client.post('/runs', json={'config': ECHO, 'seed': -1}).status_code == 422
