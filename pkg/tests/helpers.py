from poolsim.demand import make_request
from poolsim.economics import PricingParams
from poolsim.engine import DriverSpec, NetworkSpec, ScenarioConfig, run
from poolsim.shareability import TravellerPrefs


def scenario(policy, positions, rows=3, cols=3, edge=500.0, horizon=3600.0, eta=1.3, seed=0):
    return ScenarioConfig(network=NetworkSpec(rows, cols, edge),
                          drivers=DriverSpec(count=len(positions), positions=tuple(positions)),
                          pricing=PricingParams(policy=policy),
                          traveller=TravellerPrefs(0.0025, eta), horizon=horizon, seed=seed)


def simulate(cfg, reqs):
    net = cfg.network.build()
    return run(cfg, net, [make_request(net, *r) for r in reqs])
