"""
Checking gradients by finite differences
========================================

The training loss runs through the lattice and back through every layer
(BPTT in the BLSTM layers, peepholes included). Here we compare the analytic
gradient with central differences for a few small random networks.
"""

from prosodynn.training import gradient_check_errors, random_gradcheck_case

for topology in ["F", "B", "FBB", "BFB"]:
    bundle, enc, gold = random_gradcheck_case(topology, hidden=8, input_dim=12, length=5, seed=1)
    errors = gradient_check_errors(bundle, enc, gold)
    worst = max(errors, key=errors.get)
    print(f"{topology:4s} worst tensor {worst:22s} relative error {errors[worst]:.2e}")

# per-tensor detail for one model
bundle, enc, gold = random_gradcheck_case("FB", hidden=4, input_dim=6, length=4)
for name, err in gradient_check_errors(bundle, enc, gold).items():
    print(f"  {name:20s} {err:.2e}")
