from crowdagg.services.logging import StageLogger


def test_child_prefixes_and_shares_sink_and_events():
    seen = []
    root = StageLogger(lambda name, evt: seen.append(name))
    trial = root.child("trial:5:0:")
    trial.stage("fit:start", {"seed": 0})
    root.stage("experiment:done", {})
    assert seen == ["trial:5:0:fit:start", "experiment:done"]
    assert root.names() == ["trial:5:0:fit:start", "experiment:done"]
    assert trial.events is root.events
    grandchild = trial.child("x:")
    assert grandchild.prefix == "trial:5:0:x:"
    grandchild.stage("fit:converged", {})
    assert root.names()[-1] == "trial:5:0:x:fit:converged"


def test_child_events_reach_a_silent_parent():
    root = StageLogger()
    root.child("restart:2:").stage("fit:max_steps", {"steps": 10})
    assert root.names() == ["restart:2:fit:max_steps"]
    assert root.events[0]["time"] >= 0


def test_sink_failures_are_swallowed():
    def boom(name, evt):
        raise RuntimeError(name)

    logger = StageLogger(boom)
    logger.stage("synth:sampled", {"n": 1})
    assert logger.events[0]["data"] == {"n": 1}
    assert logger.events[0]["time"] >= 0
