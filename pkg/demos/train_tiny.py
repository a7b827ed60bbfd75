"""Generate a small SR(3-6) set, train a tiny model for a few epochs, evaluate, and seed the solver."""

import time

from satformer.cnf import var_clause_adjacency
from satformer.generate import GenParams, LabeledInstance, generate_records
from satformer.model import ModelConfig
from satformer.solver import compare_runs, init_scores
from satformer.train import TrainConfig, attention_breakdown, evaluate, train


def main() -> None:
    train_set = [LabeledInstance.from_record(r) for r in generate_records(GenParams(3, 6, seed=1), 800)]
    test_set = [LabeledInstance.from_record(r) for r in generate_records(GenParams(3, 6, seed=2), 50)]
    config = TrainConfig(epochs=5, batch_size=16, lr=1e-3,
                         model=ModelConfig.make(dim=32, iterations=8, window=4, levels=2, heads=4))
    t0 = time.time()
    result = train(train_set, config)
    print(f"trained {len(train_set)} instances in {time.time() - t0:.0f} s, epoch losses {result.epoch_losses}")
    model = result.checkpoint.model

    report = evaluate(model, test_set, check_attention=True)
    print(f"held-out accuracy {report.accuracy:.1%}")
    for key, b in report.buckets.items():
        print(f"  {key}: {b['correct']}/{b['count']}")
    br = attention_breakdown(model, test_set)
    print(f"level-1 attention CC/CU/UC/UU: {br.cc:.1f}/{br.cu:.1f}/{br.uc:.1f}/{br.uu:.1f}")

    unsat = next(r for r in test_set if not r.is_sat)
    pred = model.predict(unsat.instance)
    v = init_scores(var_clause_adjacency(unsat.instance), pred["y_clause"], pred["y_sat"])
    stats = compare_runs(unsat.instance, initial=v)
    print(f"{unsat.id}: predicted P(sat)={pred['y_sat']:.2f}, "
          f"learnt clauses {stats['without']['stats']['learnt_clauses']} -> {stats['with']['stats']['learnt_clauses']}")


if __name__ == "__main__":
    main()
