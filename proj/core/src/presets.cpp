#include "tbrw/experiment.hpp"

#include "tbrw/errors.hpp"

namespace tbrw {

namespace {

ShortcutParams fast_shortcut() {
  ShortcutParams s;
  s.policy = ShortcutParams::Policy::fast;
  s.epsilon = 0.01;
  return s;
}

ShortcutParams rigorous_shortcut() {
  ShortcutParams s;
  s.policy = ShortcutParams::Policy::rigorous;
  s.epsilon = 0.01;
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"degree-dist",       "mode-crossval", "growth-times",
          "red-fraction",      "leaf-fraction", "transience-demo",
          "recurrence-windows", "recurrence-windows-mid", "oracle-check",
          "conditions"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.experiment = name;
  c.seed = 1729;
  c.out_dir = "out/" + name;

  if (name == "degree-dist") {
    c.law = LawSequence(BernoulliPowerLaw{1.0, 0.75});
    c.mode = fast_shortcut();
    c.growth_budget = 100'000;
    c.replicas = 5;
    c.params = DegreeDistParams{};
    return c;
  }
  if (name == "mode-crossval") {
    c.law = LawSequence(BernoulliPowerLaw{1.0, 0.75});
    c.mode = ExactParams{};
    c.growth_budget = 500;
    c.replicas = 20;
    CrossvalParams p;
    p.alt_mode = rigorous_shortcut();
    c.params = p;
    return c;
  }
  if (name == "growth-times") {
    c.law = LawSequence(BernoulliPowerLaw{1.0, 0.8});
    c.growth_budget = 10'000;
    c.replicas = 20;
    c.params = GrowthTimesParams{};
    return c;
  }
  if (name == "red-fraction") {
    c.law = LawSequence(BernoulliPowerLaw{1.0, 0.75});
    c.mode = fast_shortcut();
    c.growth_budget = 100'000;
    c.replicas = 10;
    c.params = RedFractionParams{};
    return c;
  }
  if (name == "leaf-fraction") {
    c.law = LawSequence(LogBurstLaw{0.8});
    c.mode = fast_shortcut();
    c.growth_budget = 2'000;
    c.replicas = 10;
    c.params = LeafFractionParams{};
    return c;
  }
  if (name == "transience-demo") {
    c.law = LawSequence(WeightedBurstLaw{ProbSequence(HarmonicProb{1.0}),
                                         CountSequence(Pow2Count{1.0, 1.1, true})});
    c.mode = LumpedParams{400};
    c.growth_budget = 60;
    c.replicas = 10;
    c.params = TransienceDemoParams{};
    return c;
  }
  if (name == "recurrence-windows") {
    c.law = LawSequence(BernoulliPowerLaw{1.0, 0.8});
    c.mode = ExactParams{};
    c.step_budget = 10'000'000;
    c.replicas = 10;
    WindowsParams p;
    p.grid.anchors = {10'000, 100'000, 1'000'000};
    p.grid.per_anchor = 20;
    p.grid.rule = WindowGrid::LengthRule::mean_square;
    p.grid.g_exponent = 0.05;
    c.params = p;
    return c;
  }
  if (name == "recurrence-windows-mid") {
    c.law = LawSequence(BernoulliPowerLaw{1.0, 0.6});
    c.mode = ExactParams{};
    c.step_budget = 10'000'000;
    c.replicas = 10;
    WindowsParams p;
    p.grid.anchors = {10'000, 100'000, 1'000'000};
    p.grid.per_anchor = 20;
    p.grid.rule = WindowGrid::LengthRule::power;
    p.grid.exponent = 2.0 * (1.0 - 0.6) + 0.05;
    p.gated = false;  // reported, not enforced
    c.params = p;
    return c;
  }
  if (name == "oracle-check") {
    c.params = OracleCheckParams{};
    return c;
  }
  if (name == "conditions") {
    ConditionsParams p;
    p.kind = ConditionsParams::Kind::transience;
    p.horizon = 60;
    p.p = ProbSequence(HarmonicProb{1.0});
    p.w = CountSequence(Pow2Count{1.0, 1.1, true});
    p.a = CountSequence(Pow2Count{1.0, 1.03, false});
    c.params = p;
    return c;
  }
  throw ArgumentError("unknown experiment preset: " + name);
}

}  // namespace tbrw
