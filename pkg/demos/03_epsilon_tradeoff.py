"""
How much margin does epsilon buy?
=================================

The velocity penalty weight epsilon does not affect whether the filtered
system stays safe, only how close to the cone boundary it is allowed to
get. Small epsilon lets the attitude approach the boundary; larger epsilon
keeps more distance.
"""
from geocbf.scenario import ScenarioConfig, run_sweep

values = [0.05, 0.1, 0.5, 2.0, 8.0]
base = ScenarioConfig(filter="qp", T=10.0)
print(" epsilon   min h0    max |tau|")
for value, rep in run_sweep(base, "epsilon", values):
    print(f"{value:8.2f}  {rep.min_h0:7.4f}   {rep.max_torque_norm:7.3f}")

# In this scenario the peak torque is the PD kick at t = 0, before the
# filter has anything to correct, so it does not move with epsilon. The
# filter only ever reduces the outward push here.

# The same sweep from the shell:
#   geocbf sweep --param epsilon --values 0.05,0.1,0.5,2,8 --config demos/satellite.cfg
