#include "tbrw/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tbrw/errors.hpp"
#include "tbrw/oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tbrw {

namespace {

/// Shortest round-trip decimal rendering; identical bytes on every run.
std::string fmt(double v) { return json(v).dump(); }

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StateError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw StateError("write failed for " + path.string());
}

std::string pad3(std::uint64_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%03llu", static_cast<unsigned long long>(i));
  return buf;
}

void parallel_for(std::uint32_t jobs, const std::function<void(std::uint32_t)>& fn) {
  std::uint32_t workers = std::min(jobs, thread_cap());
  if (workers <= 1) {
    for (std::uint32_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::uint32_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::uint32_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          std::uint32_t i = next.fetch_add(1);
          if (i >= jobs) break;
          fn(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

// --- JSON (de)serialization --------------------------------------------------

const char* tail_name(ListTail t) {
  switch (t) {
    case ListTail::zero: return "zero";
    case ListTail::repeat_last: return "repeat-last";
    default: return "error";
  }
}

ListTail tail_from(const std::string& s) {
  if (s == "zero") return ListTail::zero;
  if (s == "repeat-last") return ListTail::repeat_last;
  if (s == "error") return ListTail::error;
  throw ArgumentError("unknown list tail rule: " + s);
}

json prob_seq_json(const ProbSequence& s) {
  json j;
  if (const auto* h = std::get_if<HarmonicProb>(&s.spec())) {
    j["type"] = "harmonic";
    j["offset"] = h->offset;
  } else if (const auto* p = std::get_if<PowerProb>(&s.spec())) {
    j["type"] = "power";
    j["c"] = p->c;
    j["gamma"] = p->gamma;
  } else if (const auto* c = std::get_if<ConstantProb>(&s.spec())) {
    j["type"] = "constant";
    j["p"] = c->p;
  } else if (std::holds_alternative<CombedProb>(s.spec())) {
    j["type"] = "combed";
  } else {
    const auto& l = std::get<ListProb>(s.spec());
    j["type"] = "list";
    j["values"] = l.values;
    j["tail"] = tail_name(l.tail);
  }
  return j;
}

ProbSequence prob_seq_from_json(const json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "harmonic") return ProbSequence(HarmonicProb{j.value("offset", 1.0)});
  if (type == "power") return ProbSequence(PowerProb{j.value("c", 1.0), j.value("gamma", 1.0)});
  if (type == "constant") return ProbSequence(ConstantProb{j.value("p", 1.0)});
  if (type == "combed") return ProbSequence(CombedProb{});
  if (type == "list") {
    ListProb l;
    l.values = j.at("values").get<std::vector<double>>();
    l.tail = tail_from(j.value("tail", std::string("error")));
    return ProbSequence(l);
  }
  throw ArgumentError("unknown probability sequence type: " + type);
}

json count_seq_json(const CountSequence& s) {
  json j;
  if (const auto* c = std::get_if<ConstantCount>(&s.spec())) {
    j["type"] = "constant";
    j["v"] = c->v;
  } else if (const auto* p = std::get_if<Pow2Count>(&s.spec())) {
    j["type"] = "pow2";
    j["coeff"] = p->coeff;
    j["alpha"] = p->alpha;
    j["ceil_exponent"] = p->ceil_exponent;
  } else {
    const auto& l = std::get<ListCount>(s.spec());
    j["type"] = "list";
    j["values"] = l.values;
    j["tail"] = tail_name(l.tail);
  }
  return j;
}

CountSequence count_seq_from_json(const json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "constant") return CountSequence(ConstantCount{j.value("v", std::uint64_t{1})});
  if (type == "pow2")
    return CountSequence(
        Pow2Count{j.value("coeff", 1.0), j.value("alpha", 1.0), j.value("ceil_exponent", false)});
  if (type == "list") {
    ListCount l;
    l.values = j.at("values").get<std::vector<std::uint64_t>>();
    l.tail = tail_from(j.value("tail", std::string("error")));
    return CountSequence(l);
  }
  throw ArgumentError("unknown count sequence type: " + type);
}

json law_json(const LawSequence& law) {
  if (!law.shift().is_zero())
    throw ArgumentError("config laws carry no index shift");
  json j;
  if (const auto* b = std::get_if<BernoulliPowerLaw>(&law.spec())) {
    j["type"] = "bernoulli-power";
    j["c"] = b->c;
    j["gamma"] = b->gamma;
  } else if (const auto* l = std::get_if<LogBurstLaw>(&law.spec())) {
    j["type"] = "log-burst";
    j["delta"] = l->delta;
  } else if (const auto* w = std::get_if<WeightedBurstLaw>(&law.spec())) {
    j["type"] = "weighted-burst";
    j["p"] = prob_seq_json(w->p);
    j["w"] = count_seq_json(w->w);
  } else if (const auto* c = std::get_if<ConstantLaw>(&law.spec())) {
    j["type"] = "constant";
    j["p"] = c->p;
    j["z"] = c->z;
  } else {
    const auto& t = std::get<TableLaw>(law.spec());
    j["type"] = "table";
    json rows = json::array();
    for (const TableLaw::Row& r : t.rows) rows.push_back(json::array({r.value, r.prob}));
    j["rows"] = std::move(rows);
    j["tail"] = tail_name(t.tail);
  }
  return j;
}

LawSequence law_from_json(const json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "bernoulli-power")
    return LawSequence(BernoulliPowerLaw{j.value("c", 1.0), j.value("gamma", 1.0)});
  if (type == "log-burst") return LawSequence(LogBurstLaw{j.value("delta", 1.0)});
  if (type == "weighted-burst")
    return LawSequence(
        WeightedBurstLaw{prob_seq_from_json(j.at("p")), count_seq_from_json(j.at("w"))});
  if (type == "constant")
    return LawSequence(ConstantLaw{j.value("p", 1.0), j.value("z", std::uint64_t{1})});
  if (type == "table") {
    TableLaw t;
    for (const json& r : j.at("rows"))
      t.rows.push_back({r.at(0).get<std::uint64_t>(), r.at(1).get<double>()});
    t.tail = tail_from(j.value("tail", std::string("error")));
    return LawSequence(t);
  }
  throw ArgumentError("unknown law type: " + type);
}

json mode_json(const EngineMode& m) {
  json j;
  if (std::holds_alternative<ExactParams>(m)) {
    j["type"] = "exact";
  } else if (const auto* s = std::get_if<ShortcutParams>(&m)) {
    j["type"] = "shortcut";
    j["policy"] = s->policy == ShortcutParams::Policy::rigorous ? "rigorous" : "fast";
    j["epsilon"] = s->epsilon;
    j["fast_coefficient"] = s->fast_coefficient;
    j["fallback_cap"] = s->fallback_cap;
    j["lumped_fallback_max_states"] = s->lumped_fallback_max_states;
  } else {
    j["type"] = "lumped";
    j["max_states"] = std::get<LumpedParams>(m).max_states;
  }
  return j;
}

EngineMode mode_from_json(const json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "exact") return ExactParams{};
  if (type == "shortcut") {
    ShortcutParams s;
    std::string policy = j.value("policy", std::string("rigorous"));
    if (policy == "rigorous") {
      s.policy = ShortcutParams::Policy::rigorous;
    } else if (policy == "fast") {
      s.policy = ShortcutParams::Policy::fast;
    } else {
      throw ArgumentError("unknown shortcut policy: " + policy);
    }
    s.epsilon = j.value("epsilon", 0.01);
    s.fast_coefficient = j.value("fast_coefficient", 8.0);
    s.fallback_cap = j.value("fallback_cap", std::uint64_t{1'000'000'000});
    s.lumped_fallback_max_states = j.value("lumped_fallback_max_states", std::uint64_t{0});
    return s;
  }
  if (type == "lumped") return LumpedParams{j.value("max_states", std::uint64_t{400})};
  throw ArgumentError("unknown engine mode: " + type);
}

json tree_spec_json(const TreeSpec& t) {
  json j;
  switch (t.shape) {
    case TreeSpec::Shape::single_vertex: j["shape"] = "single-vertex"; break;
    case TreeSpec::Shape::single_edge: j["shape"] = "single-edge"; break;
    case TreeSpec::Shape::path:
      j["shape"] = "path";
      j["n"] = t.n;
      break;
    case TreeSpec::Shape::star:
      j["shape"] = "star";
      j["n"] = t.n;
      break;
  }
  return j;
}

TreeSpec tree_spec_from_json(const json& j) {
  TreeSpec t;
  std::string shape = j.value("shape", std::string("single-edge"));
  if (shape == "single-vertex") {
    t.shape = TreeSpec::Shape::single_vertex;
  } else if (shape == "single-edge") {
    t.shape = TreeSpec::Shape::single_edge;
  } else if (shape == "path") {
    t.shape = TreeSpec::Shape::path;
    t.n = j.value("n", std::uint32_t{2});
  } else if (shape == "star") {
    t.shape = TreeSpec::Shape::star;
    t.n = j.value("n", std::uint32_t{3});
  } else {
    throw ArgumentError("unknown tree shape: " + shape);
  }
  return t;
}

json grid_json(const WindowGrid& g) {
  json j;
  j["anchors"] = g.anchors;
  j["per_anchor"] = g.per_anchor;
  j["rule"] = g.rule == WindowGrid::LengthRule::mean_square ? "mean-square" : "power";
  j["g_exponent"] = g.g_exponent;
  j["exponent"] = g.exponent;
  return j;
}

WindowGrid grid_from_json(const json& j) {
  WindowGrid g;
  g.anchors = j.at("anchors").get<std::vector<std::uint64_t>>();
  g.per_anchor = j.value("per_anchor", std::uint32_t{20});
  std::string rule = j.value("rule", std::string("mean-square"));
  if (rule == "mean-square") {
    g.rule = WindowGrid::LengthRule::mean_square;
  } else if (rule == "power") {
    g.rule = WindowGrid::LengthRule::power;
  } else {
    throw ArgumentError("unknown window length rule: " + rule);
  }
  g.g_exponent = j.value("g_exponent", 0.05);
  g.exponent = j.value("exponent", 0.85);
  return g;
}

json params_json(const ExperimentParams& p) {
  json j;
  if (const auto* d = std::get_if<DegreeDistParams>(&p)) {
    j["checkpoints"] = d->checkpoints;
    j["degree_cap"] = d->degree_cap;
    j["gate_d_max"] = d->gate_d_max;
    j["per_degree_tol"] = d->per_degree_tol;
    j["tv_tol"] = d->tv_tol;
    j["gated"] = d->gated;
  } else if (const auto* c = std::get_if<CrossvalParams>(&p)) {
    j["alt_mode"] = mode_json(c->alt_mode);
    j["checkpoints"] = c->checkpoints;
    j["degree_cap"] = c->degree_cap;
    j["d_max"] = c->d_max;
    j["se_multiplier"] = c->se_multiplier;
  } else if (const auto* g = std::get_if<GrowthTimesParams>(&p)) {
    j["k_max"] = g->k_max;
    j["stride"] = g->stride;
    j["delta"] = g->delta;
    j["gamma"] = g->gamma;
    j["ratio_at"] = g->ratio_at;
    j["ratio_vs"] = g->ratio_vs;
    j["ratio_max"] = g->ratio_max;
    j["gated"] = g->gated;
  } else if (const auto* r = std::get_if<RedFractionParams>(&p)) {
    j["delta"] = r->delta;
    j["stride"] = r->stride;
    j["checkpoints"] = r->checkpoints;
    j["final_max"] = r->final_max;
    j["require_nonincreasing"] = r->require_nonincreasing;
    j["gated"] = r->gated;
  } else if (const auto* l = std::get_if<LeafFractionParams>(&p)) {
    j["checkpoints"] = l->checkpoints;
    j["final_min"] = l->final_min;
    j["require_increasing"] = l->require_increasing;
    j["gated"] = l->gated;
  } else if (const auto* t = std::get_if<TransienceDemoParams>(&p)) {
    j["stride"] = t->stride;
    j["early_k"] = t->early_k;
    j["final_min"] = t->final_min;
    j["gated"] = t->gated;
  } else if (const auto* w = std::get_if<WindowsParams>(&p)) {
    j["grid"] = grid_json(w->grid);
    j["min_fraction"] = w->min_fraction;
    j["gated"] = w->gated;
  } else if (std::holds_alternative<OracleCheckParams>(p)) {
    j = json::object();
  } else {
    const auto& c = std::get<ConditionsParams>(p);
    j["kind"] = c.kind == ConditionsParams::Kind::recurrence ? "recurrence" : "transience";
    j["horizon"] = c.horizon;
    if (c.p) j["p"] = prob_seq_json(*c.p);
    if (c.w) j["w"] = count_seq_json(*c.w);
    if (c.a) j["a"] = count_seq_json(*c.a);
    j["plateau_eps"] = c.plateau_eps;
    j["plateau_by"] = c.plateau_by;
    j["gated"] = c.gated;
  }
  return j;
}

ExperimentParams params_from_json(const std::string& experiment, const json& j) {
  if (experiment == "degree-dist") {
    DegreeDistParams p;
    if (j.contains("checkpoints")) p.checkpoints = j.at("checkpoints").get<std::vector<std::uint64_t>>();
    p.degree_cap = j.value("degree_cap", p.degree_cap);
    p.gate_d_max = j.value("gate_d_max", p.gate_d_max);
    p.per_degree_tol = j.value("per_degree_tol", p.per_degree_tol);
    p.tv_tol = j.value("tv_tol", p.tv_tol);
    p.gated = j.value("gated", p.gated);
    return p;
  }
  if (experiment == "mode-crossval") {
    CrossvalParams p;
    if (j.contains("alt_mode")) p.alt_mode = mode_from_json(j.at("alt_mode"));
    if (j.contains("checkpoints")) p.checkpoints = j.at("checkpoints").get<std::vector<std::uint64_t>>();
    p.degree_cap = j.value("degree_cap", p.degree_cap);
    p.d_max = j.value("d_max", p.d_max);
    p.se_multiplier = j.value("se_multiplier", p.se_multiplier);
    return p;
  }
  if (experiment == "growth-times") {
    GrowthTimesParams p;
    p.k_max = j.value("k_max", p.k_max);
    p.stride = j.value("stride", p.stride);
    p.delta = j.value("delta", p.delta);
    p.gamma = j.value("gamma", p.gamma);
    p.ratio_at = j.value("ratio_at", p.ratio_at);
    p.ratio_vs = j.value("ratio_vs", p.ratio_vs);
    p.ratio_max = j.value("ratio_max", p.ratio_max);
    p.gated = j.value("gated", p.gated);
    return p;
  }
  if (experiment == "red-fraction") {
    RedFractionParams p;
    p.delta = j.value("delta", p.delta);
    p.stride = j.value("stride", p.stride);
    if (j.contains("checkpoints")) p.checkpoints = j.at("checkpoints").get<std::vector<std::uint64_t>>();
    p.final_max = j.value("final_max", p.final_max);
    p.require_nonincreasing = j.value("require_nonincreasing", p.require_nonincreasing);
    p.gated = j.value("gated", p.gated);
    return p;
  }
  if (experiment == "leaf-fraction") {
    LeafFractionParams p;
    if (j.contains("checkpoints")) p.checkpoints = j.at("checkpoints").get<std::vector<std::uint64_t>>();
    p.final_min = j.value("final_min", p.final_min);
    p.require_increasing = j.value("require_increasing", p.require_increasing);
    p.gated = j.value("gated", p.gated);
    return p;
  }
  if (experiment == "transience-demo") {
    TransienceDemoParams p;
    p.stride = j.value("stride", p.stride);
    p.early_k = j.value("early_k", p.early_k);
    p.final_min = j.value("final_min", p.final_min);
    p.gated = j.value("gated", p.gated);
    return p;
  }
  if (experiment == "recurrence-windows" || experiment == "recurrence-windows-mid") {
    WindowsParams p;
    if (j.contains("grid")) p.grid = grid_from_json(j.at("grid"));
    p.min_fraction = j.value("min_fraction", p.min_fraction);
    p.gated = j.value("gated", p.gated);
    return p;
  }
  if (experiment == "oracle-check") return OracleCheckParams{};
  if (experiment == "conditions") {
    ConditionsParams p;
    std::string kind = j.value("kind", std::string("transience"));
    if (kind == "recurrence") {
      p.kind = ConditionsParams::Kind::recurrence;
    } else if (kind == "transience") {
      p.kind = ConditionsParams::Kind::transience;
    } else {
      throw ArgumentError("unknown conditions kind: " + kind);
    }
    p.horizon = j.value("horizon", p.horizon);
    if (j.contains("p")) p.p = prob_seq_from_json(j.at("p"));
    if (j.contains("w")) p.w = count_seq_from_json(j.at("w"));
    if (j.contains("a")) p.a = count_seq_from_json(j.at("a"));
    p.plateau_eps = j.value("plateau_eps", p.plateau_eps);
    p.plateau_by = j.value("plateau_by", p.plateau_by);
    p.gated = j.value("gated", p.gated);
    return p;
  }
  throw ArgumentError("unknown experiment: " + experiment);
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["schema"] = c.schema;
  j["experiment"] = c.experiment;
  if (c.law) j["law"] = law_json(*c.law);
  j["mode"] = mode_json(c.mode);
  j["initial_tree"] = tree_spec_json(c.initial_tree);
  j["growth_budget"] = c.growth_budget;
  j["step_budget"] = c.step_budget;
  j["replicas"] = c.replicas;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["params"] = params_json(c.params);
  return j;
}

// --- validation ---------------------------------------------------------------

void require_sorted_checkpoints(const std::vector<std::uint64_t>& cps, std::uint64_t budget,
                                const char* what) {
  if (cps.empty()) throw ArgumentError(std::string(what) + ": checkpoints must be nonempty");
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] < 1) throw ArgumentError(std::string(what) + ": checkpoints must be >= 1");
    if (i > 0 && cps[i] <= cps[i - 1])
      throw ArgumentError(std::string(what) + ": checkpoints must be strictly increasing");
  }
  if (cps.back() > budget)
    throw ArgumentError(std::string(what) + ": final checkpoint exceeds the growth budget");
}

void validate_config(const ExperimentConfig& c) {
  if (c.schema != kConfigSchema)
    throw ArgumentError("unsupported config schema " + std::to_string(c.schema));
  if (c.replicas < 1) throw ArgumentError("replicas must be >= 1");

  bool needs_law = true;
  bool needs_engine = true;
  if (const auto* d = std::get_if<DegreeDistParams>(&c.params)) {
    if (c.experiment != "degree-dist") throw ArgumentError("params do not match experiment name");
    require_sorted_checkpoints(d->checkpoints, c.growth_budget, "degree-dist");
    if (d->degree_cap < d->gate_d_max) throw ArgumentError("degree cap below the gated range");
  } else if (const auto* x = std::get_if<CrossvalParams>(&c.params)) {
    if (c.experiment != "mode-crossval") throw ArgumentError("params do not match experiment name");
    require_sorted_checkpoints(x->checkpoints, c.growth_budget, "mode-crossval");
    if (c.replicas < 2) throw ArgumentError("mode-crossval needs >= 2 replicas per mode");
    if (x->d_max < 1 || x->d_max > x->degree_cap)
      throw ArgumentError("mode-crossval: d_max must lie in [1, degree_cap]");
  } else if (const auto* g = std::get_if<GrowthTimesParams>(&c.params)) {
    if (c.experiment != "growth-times") throw ArgumentError("params do not match experiment name");
    needs_engine = false;
    if (g->k_max < 1 || g->stride < 1) throw ArgumentError("growth-times: k_max and stride must be >= 1");
    for (std::uint64_t k : {g->ratio_at, g->ratio_vs})
      if (k > g->k_max || (k % g->stride != 0 && k != g->k_max))
        throw ArgumentError("growth-times: ratio checkpoints must be recorded rows");
  } else if (const auto* r = std::get_if<RedFractionParams>(&c.params)) {
    if (c.experiment != "red-fraction") throw ArgumentError("params do not match experiment name");
    require_sorted_checkpoints(r->checkpoints, c.growth_budget, "red-fraction");
    for (std::uint64_t k : r->checkpoints)
      if (k % r->stride != 0 && k != c.growth_budget)
        throw ArgumentError("red-fraction: checkpoints must be multiples of the stride");
  } else if (const auto* l = std::get_if<LeafFractionParams>(&c.params)) {
    if (c.experiment != "leaf-fraction") throw ArgumentError("params do not match experiment name");
    require_sorted_checkpoints(l->checkpoints, c.growth_budget, "leaf-fraction");
  } else if (const auto* t = std::get_if<TransienceDemoParams>(&c.params)) {
    if (c.experiment != "transience-demo") throw ArgumentError("params do not match experiment name");
    if (t->early_k < 1 || t->early_k > c.growth_budget)
      throw ArgumentError("transience-demo: early_k must lie in [1, growth budget]");
  } else if (const auto* w = std::get_if<WindowsParams>(&c.params)) {
    if (c.experiment != "recurrence-windows" && c.experiment != "recurrence-windows-mid")
      throw ArgumentError("params do not match experiment name");
    if (!std::holds_alternative<ExactParams>(c.mode))
      throw ArgumentError("window experiments replay every step and need the exact engine");
    if (c.step_budget < 1) throw ArgumentError("window experiments need a step budget");
    if (w->grid.anchors.empty() || w->grid.per_anchor < 1)
      throw ArgumentError("window grid needs anchors and per_anchor >= 1");
  } else if (std::holds_alternative<OracleCheckParams>(c.params)) {
    if (c.experiment != "oracle-check") throw ArgumentError("params do not match experiment name");
    needs_law = false;
    needs_engine = false;
  } else {
    const auto& p = std::get<ConditionsParams>(c.params);
    if (c.experiment != "conditions") throw ArgumentError("params do not match experiment name");
    needs_engine = false;
    if (p.kind == ConditionsParams::Kind::recurrence) {
      if (!c.law) throw ArgumentError("recurrence conditions need a law");
      if (p.horizon < 10) throw ArgumentError("recurrence conditions need horizon >= 10");
      needs_law = true;
    } else {
      if (!p.p || !p.w || !p.a)
        throw ArgumentError("transience conditions need the p, w and a sequences");
      if (p.horizon < 4) throw ArgumentError("transience conditions need horizon >= 4");
      needs_law = false;
    }
  }

  if (needs_law && !c.law) throw ArgumentError("experiment " + c.experiment + " needs a law");
  if (needs_engine) {
    if (c.growth_budget == 0 && c.step_budget == 0)
      throw ArgumentError("experiment " + c.experiment + " needs a growth or step budget");
    if (c.step_budget > 0 && !std::holds_alternative<ExactParams>(c.mode))
      throw ArgumentError("step budgets require the exact engine");
  }
  if (c.experiment == "red-fraction" && !c.law->single_leaf_only())
    throw ArgumentError("red-fraction needs a single-leaf law");
}

// --- replica plumbing ---------------------------------------------------------

struct ReplicaSeeds {
  std::uint64_t master = 0;
  std::uint64_t engine = 0;
  std::uint64_t coin = 0;
};

ReplicaSeeds replica_seeds(std::uint64_t master, std::uint64_t job) {
  ReplicaSeeds s;
  s.master = RngStream::derive(master, job);
  s.engine = RngStream::derive(s.master, 0);
  s.coin = RngStream::derive(s.master, 1);
  return s;
}

struct ReplicaSlot {
  bool failed = false;
  std::string error;
  std::vector<DegreeDistObserver::Snapshot> degree;
  std::vector<TauObserver::Row> tau;
  std::vector<RedBlueObserver::Row> redblue;
  std::vector<DistanceObserver::Row> distance;
  std::vector<LeafFractionObserver::Row> leaf;
  std::vector<int> window_flags;
  WindowReport window_report;
};

Engine make_engine(const ExperimentConfig& c, const EngineMode& mode, std::uint64_t seed) {
  CompressedTree tree = c.initial_tree.build();
  VertexRef start = VertexRef::vertex(tree.root());
  return Engine(*c.law, std::move(tree), start, seed, mode);
}

template <typename Fn>
void guard(ReplicaSlot& slot, Fn&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    slot.failed = true;
    slot.error = e.what();
  }
}

void run_budget(Engine& eng, std::uint64_t budget, std::span<Observer* const> observers) {
  std::uint64_t fired = eng.run_growths(budget, observers);
  if (fired < budget)
    throw StateError("growth exhausted after " + std::to_string(fired) + " of " +
                     std::to_string(budget) + " events");
}

// --- CSV builders -------------------------------------------------------------

std::string degree_csv(const std::vector<DegreeDistObserver::Snapshot>& snaps,
                       std::uint32_t cap) {
  std::ostringstream out;
  out << "checkpoint_k,d,count,fraction,target,abs_error\n";
  for (const auto& s : snaps) {
    std::vector<ExtCount> counts(cap + 1);
    for (const auto& [deg, cnt] : s.histogram)
      if (deg.fits_uint64() && deg.to_uint64() <= cap) counts[deg.to_uint64()] = cnt;
    for (std::uint32_t d = 1; d <= cap; ++d) {
      double frac = (counts[d] / s.vertex_count).to_double();
      double target = pa_target(d);
      out << s.k << "," << d << "," << counts[d].to_string() << "," << fmt(frac) << ","
          << fmt(target) << "," << fmt(std::abs(frac - target)) << "\n";
    }
  }
  return out.str();
}

std::string tau_csv(const std::vector<TauObserver::Row>& rows) {
  std::ostringstream out;
  out << "k,tau_k,statistic\n";
  for (const auto& r : rows)
    out << r.k << "," << r.tau.to_string() << "," << fmt(r.statistic) << "\n";
  return out.str();
}

std::string redblue_csv(const std::vector<RedBlueObserver::Row>& rows) {
  std::ostringstream out;
  out << "k,B,R,good_flag\n";
  for (const auto& r : rows)
    out << r.k << "," << r.blue << "," << r.red << "," << (r.good ? 1 : 0) << "\n";
  return out.str();
}

std::string distance_csv(const std::vector<DistanceObserver::Row>& rows) {
  std::ostringstream out;
  out << "k,tau_k,distance\n";
  for (const auto& r : rows)
    out << r.k << "," << r.tau.to_string() << "," << r.distance << "\n";
  return out.str();
}

std::string leaf_csv(const std::vector<LeafFractionObserver::Row>& rows) {
  std::ostringstream out;
  out << "k,leaves,vertices,fraction\n";
  for (const auto& r : rows)
    out << r.k << "," << r.leaves.to_string() << "," << r.vertices.to_string() << ","
        << fmt(r.fraction) << "\n";
  return out.str();
}

std::string windows_csv(const std::vector<WindowSpec>& windows, const std::vector<int>& flags) {
  std::ostringstream out;
  out << "n,length,visited_flag\n";
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (flags[i] < 0) continue;  // window not covered by the step log
    out << windows[i].start << "," << windows[i].length << "," << flags[i] << "\n";
  }
  return out.str();
}

// --- aggregation --------------------------------------------------------------

struct GateSet {
  std::map<std::string, bool> gates;
  std::map<std::string, double> stats;
  json detail = json::object();
  bool gated = true;
};

const DegreeDistObserver::Snapshot& snapshot_at(const std::vector<DegreeDistObserver::Snapshot>& v,
                                                std::uint64_t k) {
  for (const auto& s : v)
    if (s.k == k) return s;
  throw StateError("missing checkpoint " + std::to_string(k));
}

/// Fractions for d = 1..cap plus the above-cap remainder.
std::vector<double> fraction_vector(const DegreeDistObserver::Snapshot& s, std::uint32_t cap) {
  std::vector<double> f(cap + 2, 0.0);
  for (const auto& [deg, cnt] : s.histogram) {
    double frac = (cnt / s.vertex_count).to_double();
    if (deg.fits_uint64() && deg.to_uint64() <= cap) {
      f[deg.to_uint64()] += frac;
    } else {
      f[cap + 1] += frac;
    }
  }
  return f;
}

GateSet aggregate_degree(const std::vector<ReplicaSlot>& slots, const DegreeDistParams& p) {
  GateSet g;
  g.gated = p.gated;
  std::uint64_t final_k = p.checkpoints.back();
  std::uint32_t cap = p.degree_cap;
  std::vector<std::vector<double>> fracs;  // per replica
  for (const auto& s : slots)
    if (!s.failed) fracs.push_back(fraction_vector(snapshot_at(s.degree, final_k), cap));
  if (fracs.empty()) throw StateError("no successful replicas");

  std::vector<double> med(cap + 2, 0.0);
  for (std::uint32_t d = 1; d <= cap + 1; ++d) {
    std::vector<double> col;
    for (const auto& f : fracs) col.push_back(f[d]);
    med[d] = median(std::move(col));
  }

  bool per_degree_ok = true;
  json per_d = json::object();
  for (std::uint32_t d = 1; d <= p.gate_d_max; ++d) {
    double err = std::abs(med[d] - pa_target(d));
    g.stats["median_fraction_d" + std::to_string(d)] = med[d];
    g.stats["abs_error_d" + std::to_string(d)] = err;
    per_d[std::to_string(d)] = {{"median_fraction", med[d]},
                                {"target", pa_target(d)},
                                {"abs_error", err}};
    if (err > p.per_degree_tol) per_degree_ok = false;
  }
  double tv = 0.0;
  for (std::uint32_t d = 1; d <= cap; ++d) tv += std::abs(med[d] - pa_target(d));
  tv += std::abs(med[cap + 1] - (1.0 - pa_target_partial_sum(cap)));
  tv *= 0.5;

  g.stats["tv_of_median"] = tv;
  g.gates["per_degree"] = per_degree_ok;
  g.gates["tv"] = tv <= p.tv_tol;
  g.detail["final_checkpoint"] = final_k;
  g.detail["per_degree"] = per_d;
  g.detail["tv_of_median"] = tv;
  g.detail["tv_tol"] = p.tv_tol;
  g.detail["per_degree_tol"] = p.per_degree_tol;
  return g;
}

GateSet aggregate_crossval(const std::vector<ReplicaSlot>& slots, const CrossvalParams& p,
                           std::uint32_t replicas) {
  GateSet g;
  std::uint64_t final_k = p.checkpoints.back();
  auto group_stats = [&](std::size_t begin) {
    std::vector<std::vector<double>> cols(p.d_max + 1);
    for (std::size_t r = begin; r < begin + replicas; ++r) {
      if (slots[r].failed) continue;
      auto f = fraction_vector(snapshot_at(slots[r].degree, final_k), p.degree_cap);
      for (std::uint32_t d = 1; d <= p.d_max; ++d) cols[d].push_back(f[d]);
    }
    return cols;
  };
  auto cols_a = group_stats(0);
  auto cols_b = group_stats(replicas);

  bool agree = true;
  json per_d = json::object();
  for (std::uint32_t d = 1; d <= p.d_max; ++d) {
    const auto& a = cols_a[d];
    const auto& b = cols_b[d];
    if (a.size() < 2 || b.size() < 2) throw StateError("too few successful replicas for a standard error");
    auto mean_se = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      double var = ss / static_cast<double>(v.size() - 1);
      return std::pair<double, double>{mean, std::sqrt(var / static_cast<double>(v.size()))};
    };
    auto [ma, sa] = mean_se(a);
    auto [mb, sb] = mean_se(b);
    double diff = std::abs(ma - mb);
    double se = std::sqrt(sa * sa + sb * sb);
    bool ok = diff <= p.se_multiplier * se + 1e-12;
    if (!ok) agree = false;
    g.stats["diff_d" + std::to_string(d)] = diff;
    g.stats["se_d" + std::to_string(d)] = se;
    per_d[std::to_string(d)] = {{"mean_primary", ma}, {"mean_alternate", mb},
                                {"abs_diff", diff},   {"pooled_se", se}};
  }
  g.gates["histogram_agreement"] = agree;
  g.detail["final_checkpoint"] = final_k;
  g.detail["se_multiplier"] = p.se_multiplier;
  g.detail["per_degree"] = per_d;
  return g;
}

double row_stat_at(const std::vector<TauObserver::Row>& rows, std::uint64_t k) {
  for (const auto& r : rows)
    if (r.k == k) return r.statistic;
  throw StateError("missing tau row k=" + std::to_string(k));
}

GateSet aggregate_growth_times(const std::vector<ReplicaSlot>& slots, const GrowthTimesParams& p) {
  GateSet g;
  g.gated = p.gated;
  std::vector<double> at, vs;
  for (const auto& s : slots) {
    if (s.failed) continue;
    at.push_back(row_stat_at(s.tau, p.ratio_at));
    vs.push_back(row_stat_at(s.tau, p.ratio_vs));
  }
  if (at.empty()) throw StateError("no successful replicas");
  double m_at = median(std::move(at));
  double m_vs = median(std::move(vs));
  double ratio = m_vs > 0.0 ? m_at / m_vs : std::numeric_limits<double>::infinity();
  g.stats["median_stat_at"] = m_at;
  g.stats["median_stat_vs"] = m_vs;
  g.stats["decay_ratio"] = ratio;
  g.gates["decay"] = ratio < p.ratio_max;
  g.detail["ratio_at_k"] = p.ratio_at;
  g.detail["ratio_vs_k"] = p.ratio_vs;
  g.detail["median_statistic"] = {{"at", m_at}, {"vs", m_vs}};
  g.detail["decay_ratio"] = ratio;
  g.detail["ratio_max"] = p.ratio_max;
  return g;
}

GateSet aggregate_red(const std::vector<ReplicaSlot>& slots, const RedFractionParams& p) {
  GateSet g;
  g.gated = p.gated;
  std::vector<double> med;
  for (std::uint64_t cp : p.checkpoints) {
    std::vector<double> col;
    for (const auto& s : slots) {
      if (s.failed) continue;
      bool found = false;
      for (const auto& r : s.redblue)
        if (r.k == cp) {
          col.push_back(static_cast<double>(r.red) / (2.0 * static_cast<double>(r.k)));
          found = true;
          break;
        }
      if (!found) throw StateError("missing coloring row k=" + std::to_string(cp));
    }
    if (col.empty()) throw StateError("no successful replicas");
    med.push_back(median(std::move(col)));
  }
  json per_cp = json::object();
  for (std::size_t i = 0; i < p.checkpoints.size(); ++i) {
    g.stats["median_red_fraction_" + std::to_string(p.checkpoints[i])] = med[i];
    per_cp[std::to_string(p.checkpoints[i])] = med[i];
  }
  bool noninc = true;
  for (std::size_t i = 1; i < med.size(); ++i)
    if (med[i] > med[i - 1] + 1e-12) noninc = false;
  g.gates["final_small"] = med.back() <= p.final_max;
  if (p.require_nonincreasing) g.gates["nonincreasing"] = noninc;
  g.detail["median_red_fraction"] = per_cp;
  g.detail["final_max"] = p.final_max;
  return g;
}

GateSet aggregate_leaf(const std::vector<ReplicaSlot>& slots, const LeafFractionParams& p) {
  GateSet g;
  g.gated = p.gated;
  std::vector<double> med;
  for (std::uint64_t cp : p.checkpoints) {
    std::vector<double> col;
    for (const auto& s : slots) {
      if (s.failed) continue;
      bool found = false;
      for (const auto& r : s.leaf)
        if (r.k == cp) {
          col.push_back(r.fraction);
          found = true;
          break;
        }
      if (!found) throw StateError("missing leaf row k=" + std::to_string(cp));
    }
    if (col.empty()) throw StateError("no successful replicas");
    med.push_back(median(std::move(col)));
  }
  json per_cp = json::object();
  for (std::size_t i = 0; i < p.checkpoints.size(); ++i) {
    g.stats["median_leaf_fraction_" + std::to_string(p.checkpoints[i])] = med[i];
    per_cp[std::to_string(p.checkpoints[i])] = med[i];
  }
  bool increasing = true;
  for (std::size_t i = 1; i < med.size(); ++i)
    if (!(med[i] > med[i - 1])) increasing = false;
  g.gates["final_large"] = med.back() >= p.final_min;
  if (p.require_increasing) g.gates["increasing"] = increasing;
  // The per-event lower bound on the leaf count is asserted inside every run;
  // a violation surfaces as a replica failure.
  g.gates["leaf_bound"] = true;
  for (const auto& s : slots)
    if (s.failed && s.error.find("leaf bound") != std::string::npos) g.gates["leaf_bound"] = false;
  g.detail["median_leaf_fraction"] = per_cp;
  g.detail["final_min"] = p.final_min;
  return g;
}

GateSet aggregate_transience(const std::vector<ReplicaSlot>& slots, const TransienceDemoParams& p,
                             std::uint64_t budget) {
  GateSet g;
  g.gated = p.gated;
  auto distance_at = [](const ReplicaSlot& s, std::uint64_t k) {
    for (const auto& r : s.distance)
      if (r.k == k) return static_cast<double>(r.distance);
    throw StateError("missing distance row k=" + std::to_string(k));
  };
  std::vector<double> early, final_col;
  for (const auto& s : slots) {
    if (s.failed) continue;
    early.push_back(distance_at(s, p.early_k));
    final_col.push_back(distance_at(s, budget));
  }
  if (final_col.empty()) throw StateError("no successful replicas");
  double m_early = median(std::move(early));
  double m_final = median(std::move(final_col));
  g.stats["median_distance_early"] = m_early;
  g.stats["median_distance_final"] = m_final;
  g.gates["far_from_root"] = m_final >= p.final_min;
  g.gates["no_backtracking"] = m_final >= m_early;
  g.detail["early_k"] = p.early_k;
  g.detail["final_k"] = budget;
  g.detail["median_distance"] = {{"early", m_early}, {"final", m_final}};
  g.detail["final_min"] = p.final_min;
  return g;
}

GateSet aggregate_windows(const std::vector<ReplicaSlot>& slots, const WindowsParams& p) {
  GateSet g;
  g.gated = p.gated;
  std::vector<double> fracs;
  std::uint64_t evaluated = 0, skipped = 0;
  for (const auto& s : slots) {
    if (s.failed) continue;
    if (s.window_report.evaluated == 0) throw StateError("no window fits inside the step log");
    fracs.push_back(s.window_report.fraction);
    evaluated = s.window_report.evaluated;
    skipped = s.window_report.skipped;
  }
  if (fracs.empty()) throw StateError("no successful replicas");
  double m = median(std::move(fracs));
  g.stats["median_visit_fraction"] = m;
  g.gates["coverage"] = m >= p.min_fraction;
  g.detail["median_visit_fraction"] = m;
  g.detail["min_fraction"] = p.min_fraction;
  g.detail["windows_evaluated"] = evaluated;
  g.detail["windows_skipped"] = skipped;
  return g;
}

// --- condition reports --------------------------------------------------------

json trace_json(const std::vector<TraceEntry>& trace) {
  json arr = json::array();
  for (const TraceEntry& e : trace) {
    double n = e.n.to_double();
    json jn = std::isfinite(n) ? json(n) : json(e.n.to_string());
    arr.push_back(json::array({jn, e.term, e.partial, e.flag}));
  }
  return arr;
}

json report_json(const ConditionReport& r) {
  return {{"verdict", verdict_name(r.verdict)}, {"trace", trace_json(r.trace)},
          {"notes", r.notes}};
}

/// True when every trace entry from `by` on has an available value below eps.
bool plateau_from(const std::vector<TraceEntry>& trace, std::uint64_t by, double eps,
                  double& worst) {
  bool any = false, ok = true;
  worst = 0.0;
  for (const TraceEntry& e : trace) {
    if (e.n < ExtCount(by)) continue;
    any = true;
    if (e.flag == 2) {
      ok = false;
      continue;
    }
    worst = std::max(worst, e.term);
    if (!(e.term < eps)) ok = false;
  }
  return any && ok;
}

}  // namespace

// --- public helpers -----------------------------------------------------------

std::uint32_t thread_cap() {
  if (const char* env = std::getenv("TBRW_THREADS")) {
    char* end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (env[0] == '\0' || end == nullptr || *end != '\0' || v < 1 || v > 4096)
      throw ArgumentError("TBRW_THREADS must be an integer in [1, 4096]");
    return static_cast<std::uint32_t>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? hc : 1;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of an empty sample");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

CompressedTree TreeSpec::build() const {
  switch (shape) {
    case Shape::single_vertex: return CompressedTree::single_vertex();
    case Shape::single_edge: return CompressedTree::single_edge();
    case Shape::path: {
      if (n < 2) throw ArgumentError("path needs at least 2 vertices");
      std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;
      for (std::uint64_t v = 1; v < n; ++v) edges.push_back({v - 1, v});
      return CompressedTree::from_edges(edges);
    }
    case Shape::star: {
      if (n < 3) throw ArgumentError("star needs at least 3 vertices");
      std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;
      for (std::uint64_t v = 1; v < n; ++v) edges.push_back({0, v});
      return CompressedTree::from_edges(edges);
    }
  }
  throw ArgumentError("unknown tree shape");
}

std::vector<WindowSpec> WindowGrid::build(const LawSequence& law) const {
  if (anchors.empty() || per_anchor < 1)
    throw ArgumentError("window grid needs anchors and per_anchor >= 1");
  std::vector<WindowSpec> windows;
  for (std::uint64_t anchor : anchors) {
    if (anchor < 1) throw ArgumentError("window anchors must be >= 1");
    for (std::uint32_t j = 0; j < per_anchor; ++j)
      windows.push_back({anchor + anchor * j / per_anchor, 1, ""});
  }

  if (rule == LengthRule::power) {
    for (WindowSpec& w : windows) {
      double len = std::ceil(std::pow(static_cast<double>(w.start), exponent));
      w.length = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(len));
      w.kind = "power";
    }
    return windows;
  }

  // One accumulation pass of the cumulative growth mean serves every window.
  std::vector<std::size_t> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return windows[a].start < windows[b].start; });
  double msum = 0.0, comp = 0.0;
  std::uint64_t n = 0;
  for (std::size_t idx : order) {
    WindowSpec& w = windows[idx];
    while (n < w.start) {
      ++n;
      double y = law.moments(ExtCount(n)).m.to_double() - comp;
      double t = msum + y;
      comp = (t - msum) - y;
      msum = t;
    }
    double len = std::ceil(std::pow(static_cast<double>(w.start), g_exponent) * msum * msum);
    w.length = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(len));
    w.kind = "mean-square";
  }
  return windows;
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("config parse error: ") + e.what());
  }
  try {
    ExperimentConfig c;
    c.schema = j.value("schema", kConfigSchema);
    c.experiment = j.at("experiment").get<std::string>();
    if (j.contains("law")) c.law = law_from_json(j.at("law"));
    if (j.contains("mode")) c.mode = mode_from_json(j.at("mode"));
    if (j.contains("initial_tree")) c.initial_tree = tree_spec_from_json(j.at("initial_tree"));
    c.growth_budget = j.value("growth_budget", std::uint64_t{0});
    c.step_budget = j.value("step_budget", std::uint64_t{0});
    c.replicas = j.value("replicas", std::uint32_t{1});
    c.seed = j.value("seed", std::uint64_t{1});
    c.out_dir = j.value("out_dir", std::string("out"));
    c.params = params_from_json(c.experiment, j.value("params", json::object()));
    return c;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("config field error: ") + e.what());
  }
}

std::string config_to_json_text(const ExperimentConfig& config) {
  return config_json(config).dump(2) + "\n";
}

// --- run_experiment -----------------------------------------------------------

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  auto t0 = std::chrono::steady_clock::now();
  fs::path out(config.out_dir);
  fs::create_directories(out);

  std::uint32_t jobs = config.replicas;
  bool crossval = std::holds_alternative<CrossvalParams>(config.params);
  if (crossval) jobs *= 2;

  // Windows are identical across replicas; resolve them once.
  std::vector<WindowSpec> windows;
  if (const auto* wp = std::get_if<WindowsParams>(&config.params))
    windows = wp->grid.build(*config.law);

  std::vector<ReplicaSlot> slots(jobs);
  GateSet gates;
  json extra_files = json::object();

  if (std::holds_alternative<OracleCheckParams>(config.params)) {
    OracleSelfCheckReport rep = oracle_self_check();
    json checks = json::array();
    for (const IdentityCheck& c : rep.checks) {
      checks.push_back({{"name", c.name},
                        {"instances", c.instances},
                        {"max_deviation", c.max_deviation},
                        {"tolerance", c.tolerance},
                        {"pass", c.pass}});
      gates.gates[c.name] = c.pass;
      gates.stats["max_deviation_" + c.name] = c.max_deviation;
    }
    json report = {{"all_pass", rep.all_pass}, {"checks", checks}};
    write_file(out / "oracle_check.json", report.dump(2) + "\n");
    gates.detail["all_pass"] = rep.all_pass;
  } else if (const auto* cp = std::get_if<ConditionsParams>(&config.params)) {
    json report;
    if (cp->kind == ConditionsParams::Kind::recurrence) {
      ConditionReport r = check_recurrence_conditions(*config.law, cp->horizon);
      report = {{"kind", "recurrence"}, {"report", report_json(r)}};
      gates.gates["recurrence_satisfied"] = r.verdict == Verdict::satisfied_trend;
      gates.detail["verdict"] = verdict_name(r.verdict);
    } else {
      TransienceReport r = check_transience_conditions(*cp->p, *cp->w, *cp->a, cp->horizon);
      report = {{"kind", "transience"},
                {"escape_sum", report_json(r.escape_sum)},
                {"backtrack_sum", report_json(r.backtrack_sum)},
                {"growth_sum", report_json(r.growth_sum)},
                {"combined", verdict_name(r.combined)}};
      double worst1 = 0.0, worst2 = 0.0;
      bool p1 = plateau_from(r.escape_sum.trace, cp->plateau_by, cp->plateau_eps, worst1);
      bool p2 = plateau_from(r.backtrack_sum.trace, cp->plateau_by, cp->plateau_eps, worst2);
      gates.gates["escape_sum_plateau"] = p1;
      gates.gates["backtrack_sum_plateau"] = p2;
      gates.gates["growth_sum_diverges"] = r.growth_sum.verdict == Verdict::satisfied_trend;
      gates.stats["escape_tail_worst_term"] = worst1;
      gates.stats["backtrack_tail_worst_term"] = worst2;
      gates.detail["plateau_by"] = cp->plateau_by;
      gates.detail["plateau_eps"] = cp->plateau_eps;
      gates.detail["escape_notes"] = r.escape_sum.notes;
      gates.detail["combined"] = verdict_name(r.combined);
    }
    gates.gated = cp->gated;
    write_file(out / "conditions.json", report.dump(2) + "\n");
  } else {
    // Simulation experiments: one job per replica (two per replica when
    // cross-validating), joined before any aggregation or file output.
    auto run_one = [&](std::uint32_t job) {
      ReplicaSlot& slot = slots[job];
      ReplicaSeeds seeds = replica_seeds(config.seed, job);
      guard(slot, [&] {
        if (const auto* p = std::get_if<DegreeDistParams>(&config.params)) {
          Engine eng = make_engine(config, config.mode, seeds.engine);
          DegreeDistObserver obs(p->checkpoints);
          Observer* o[] = {&obs};
          run_budget(eng, config.growth_budget, o);
          slot.degree = obs.snapshots();
        } else if (const auto* x = std::get_if<CrossvalParams>(&config.params)) {
          const EngineMode& mode = job < config.replicas ? config.mode : x->alt_mode;
          Engine eng = make_engine(config, mode, seeds.engine);
          DegreeDistObserver obs(x->checkpoints);
          Observer* o[] = {&obs};
          run_budget(eng, config.growth_budget, o);
          slot.degree = obs.snapshots();
        } else if (const auto* gt = std::get_if<GrowthTimesParams>(&config.params)) {
          RngStream rng(seeds.engine);
          ExtCount after;
          for (std::uint64_t k = 1; k <= gt->k_max; ++k) {
            auto t = sample_next_growth_time(*config.law, after, rng);
            if (!t) throw StateError("growth exhausted at k=" + std::to_string(k));
            after = *t;
            if (k % gt->stride == 0 || k == gt->k_max) {
              double stat = std::exp((2.0 + gt->delta) * std::log(static_cast<double>(k)) -
                                     gt->gamma * after.ln());
              slot.tau.push_back({k, after, stat});
            }
          }
        } else if (const auto* rf = std::get_if<RedFractionParams>(&config.params)) {
          Engine eng = make_engine(config, config.mode, seeds.engine);
          RedBlueObserver obs(rf->delta, seeds.coin, rf->stride);
          Observer* o[] = {&obs};
          run_budget(eng, config.growth_budget, o);
          slot.redblue = obs.rows();
        } else if (const auto* lf = std::get_if<LeafFractionParams>(&config.params)) {
          Engine eng = make_engine(config, config.mode, seeds.engine);
          LeafFractionObserver obs(lf->checkpoints);
          Observer* o[] = {&obs};
          run_budget(eng, config.growth_budget, o);
          slot.leaf = obs.rows();
        } else if (const auto* td = std::get_if<TransienceDemoParams>(&config.params)) {
          Engine eng = make_engine(config, config.mode, seeds.engine);
          DistanceObserver obs(td->stride);
          Observer* o[] = {&obs};
          run_budget(eng, config.growth_budget, o);
          slot.distance = obs.rows();
        } else {
          Engine eng = make_engine(config, config.mode, seeds.engine);
          WindowObserver obs(windows);
          Observer* o[] = {&obs};
          eng.run_steps(config.step_budget, o);
          slot.window_flags = obs.flags();
          slot.window_report = obs.report();
        }
      });
    };
    parallel_for(jobs, run_one);

    // Per-replica CSVs, in index order.
    for (std::uint32_t job = 0; job < jobs; ++job) {
      const ReplicaSlot& s = slots[job];
      if (s.failed) continue;
      fs::path dir = out / ((crossval ? (job < config.replicas ? "primary_" : "alternate_")
                                      : "replica_") +
                            pad3(crossval ? job % config.replicas : job));
      if (const auto* p = std::get_if<DegreeDistParams>(&config.params)) {
        write_file(dir / "degree_dist.csv", degree_csv(s.degree, p->degree_cap));
      } else if (const auto* x = std::get_if<CrossvalParams>(&config.params)) {
        write_file(dir / "degree_dist.csv", degree_csv(s.degree, x->degree_cap));
      } else if (std::holds_alternative<GrowthTimesParams>(config.params)) {
        write_file(dir / "tau.csv", tau_csv(s.tau));
      } else if (std::holds_alternative<RedFractionParams>(config.params)) {
        write_file(dir / "redblue.csv", redblue_csv(s.redblue));
      } else if (std::holds_alternative<LeafFractionParams>(config.params)) {
        write_file(dir / "leaf_fraction.csv", leaf_csv(s.leaf));
      } else if (std::holds_alternative<TransienceDemoParams>(config.params)) {
        write_file(dir / "distance.csv", distance_csv(s.distance));
      } else {
        write_file(dir / "windows.csv", windows_csv(windows, s.window_flags));
      }
    }

    if (const auto* p = std::get_if<DegreeDistParams>(&config.params)) {
      gates = aggregate_degree(slots, *p);
    } else if (const auto* x = std::get_if<CrossvalParams>(&config.params)) {
      gates = aggregate_crossval(slots, *x, config.replicas);
    } else if (const auto* gt = std::get_if<GrowthTimesParams>(&config.params)) {
      gates = aggregate_growth_times(slots, *gt);
    } else if (const auto* rf = std::get_if<RedFractionParams>(&config.params)) {
      gates = aggregate_red(slots, *rf);
    } else if (const auto* lf = std::get_if<LeafFractionParams>(&config.params)) {
      gates = aggregate_leaf(slots, *lf);
    } else if (const auto* td = std::get_if<TransienceDemoParams>(&config.params)) {
      gates = aggregate_transience(slots, *td, config.growth_budget);
    } else {
      gates = aggregate_windows(slots, std::get<WindowsParams>(config.params));
    }
  }

  // --- summary and result ---
  ExperimentResult result;
  json failures = json::array();
  for (std::uint32_t job = 0; job < jobs; ++job) {
    if (!slots[job].failed) continue;
    failures.push_back({{"job", job}, {"error", slots[job].error}});
    result.replica_errors.push_back("job " + std::to_string(job) + ": " + slots[job].error);
  }
  bool replicas_ok = failures.empty();
  bool gates_ok = true;
  for (const auto& [name, ok] : gates.gates)
    if (!ok) gates_ok = false;
  result.pass = replicas_ok && (!gates.gated || gates_ok);
  result.exit_code = result.pass ? 0 : 1;
  result.gates = gates.gates;
  result.stats = gates.stats;

  json summary;
  summary["experiment"] = config.experiment;
  summary["version"] = kVersion;
  summary["replicas"] = config.replicas;
  summary["gated"] = gates.gated;
  json jg = json::object();
  for (const auto& [name, ok] : gates.gates) jg[name] = ok;
  summary["gates"] = jg;
  summary["pass"] = result.pass;
  summary["detail"] = gates.detail;
  summary["replica_failures"] = failures;
  result.summary_json = summary.dump(2) + "\n";
  write_file(out / "summary.json", result.summary_json);

  auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - t0);
  json meta;
  meta["version"] = kVersion;
  meta["config"] = config_json(config);
  meta["seed_derivation"] =
      "replica master m_i = splitmix64(seed + (i+1)*0x9E3779B97F4A7C15); "
      "engine seed = splitmix64(m_i + 0x9E3779B97F4A7C15); "
      "coin seed = splitmix64(m_i + 2*0x9E3779B97F4A7C15)";
  json seeds = json::array();
  for (std::uint32_t job = 0; job < jobs; ++job) {
    ReplicaSeeds s = replica_seeds(config.seed, job);
    seeds.push_back({{"job", job}, {"master", s.master}, {"engine", s.engine}, {"coin", s.coin}});
  }
  meta["replica_seeds"] = seeds;
  meta["threads"] = thread_cap();
  meta["wall_ms"] = wall.count();
  write_file(out / "meta.json", meta.dump(2) + "\n");
  return result;
}

// --- run_sweep ----------------------------------------------------------------

SweepResult run_sweep(const ExperimentConfig& base, const std::string& parameter,
                      const std::vector<std::string>& values) {
  if (values.empty()) throw ArgumentError("sweep needs at least one value");
  if (parameter != "gamma" && parameter != "seed" && parameter != "mode")
    throw ArgumentError("sweep parameter must be gamma, seed or mode");
  if (parameter == "gamma" &&
      (!base.law || !std::holds_alternative<BernoulliPowerLaw>(base.law->spec())))
    throw ArgumentError("gamma sweeps need the power-law leaf law");

  SweepResult sweep;
  bool any_error = false, any_fail = false;
  json points = json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepPoint pt;
    pt.label = parameter + "=" + values[i];
    ExperimentConfig c = base;
    c.out_dir = (fs::path(base.out_dir) / ("point_" + pad3(i))).string();
    try {
      if (parameter == "gamma") {
        auto spec = std::get<BernoulliPowerLaw>(base.law->spec());
        spec.gamma = std::stod(values[i]);
        c.law = LawSequence(spec);
      } else if (parameter == "seed") {
        c.seed = std::stoull(values[i]);
      } else {
        if (values[i] == "exact") {
          c.mode = ExactParams{};
        } else if (values[i] == "shortcut-rigorous") {
          c.mode = ShortcutParams{};
        } else if (values[i] == "shortcut-fast") {
          ShortcutParams s;
          s.policy = ShortcutParams::Policy::fast;
          c.mode = s;
        } else if (values[i] == "lumped") {
          c.mode = LumpedParams{};
        } else {
          throw ArgumentError("unknown mode value: " + values[i]);
        }
      }
      pt.result = run_experiment(c);
    } catch (const std::exception& e) {
      pt.error = e.what();
      any_error = true;
    }
    if (pt.error.empty() && pt.result.exit_code != 0) any_fail = true;
    json jp;
    jp["label"] = pt.label;
    jp["out_dir"] = c.out_dir;
    if (pt.error.empty()) {
      jp["pass"] = pt.result.pass;
      json stats = json::object();
      for (const auto& [k, v] : pt.result.stats) stats[k] = v;
      jp["stats"] = stats;
    } else {
      jp["error"] = pt.error;
    }
    points.push_back(jp);
    sweep.points.push_back(std::move(pt));
  }
  json report = {{"parameter", parameter}, {"points", points}};
  sweep.report_json = report.dump(2) + "\n";
  write_file(fs::path(base.out_dir) / "sweep.json", sweep.report_json);
  sweep.exit_code = any_error ? 2 : (any_fail ? 1 : 0);
  return sweep;
}

}  // namespace tbrw
