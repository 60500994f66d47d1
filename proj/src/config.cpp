#include "evmarl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

namespace evmarl {

using nlohmann::json;

void RewardConfig::validate() const {
  if (!(theta >= 0.0 && theta < 1.0)) throw std::invalid_argument("reward.theta must lie in [0,1)");
}

void RunConfig::validate() const {
  data.validate();
  agent.validate();
  reward.validate();
  if (!(optim.adam.lr > 0.0)) throw std::invalid_argument("optim.lr must be > 0");
  if (!(optim.adam.beta1 >= 0.0 && optim.adam.beta1 < 1.0 && optim.adam.beta2 >= 0.0 && optim.adam.beta2 < 1.0))
    throw std::invalid_argument("optim betas must lie in [0,1)");
  if (train.epochs < 0) throw std::invalid_argument("train.epochs must be >= 0");
  if (!(train.discount >= 0.0 && train.discount <= 1.0)) throw std::invalid_argument("train.discount must lie in [0,1]");
  if (train.batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (retrieval.pool_size < 1 || retrieval.num_queries < 0)
    throw std::invalid_argument("retrieval sizes must be positive");
}

RunConfig default_config() {
  RunConfig cfg;
  if (const char* env = std::getenv(kSeedEnv); env && *env) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(kSeedEnv) + " is not an unsigned integer: " + env);
    }
    cfg.data.seed = cfg.seed;
  }
  return cfg;
}

namespace {

// Reads known keys out of one JSON object and rejects anything left over.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(where() + " must be a JSON object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw std::invalid_argument("unknown config key: " + key(it.key()));
  }

  template <typename T>
  void read(const char* name, T& out) {
    seen_.insert(name);
    auto it = j_.find(name);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::invalid_argument("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw std::invalid_argument("expected a number");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      throw std::invalid_argument("bad value for " + key(name) + ": " + e.what());
    }
  }

  const json* child(const char* name) {
    seen_.insert(name);
    auto it = j_.find(name);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_data(const json& j, DatasetConfig& d) {
  Section s(j, "data");
  s.read("n_train", d.n_train);
  s.read("n_val", d.n_val);
  s.read("n_test", d.n_test);
  s.read("oos_fraction", d.oos_fraction);
  s.read("n_frames", d.n_frames);
  s.read("d_v", d.d_v);
  s.read("d_q", d.d_q);
  s.read("signal_noise_sigma", d.signal_noise_sigma);
  if (const json* r = s.child("moment_len_range")) {
    if (!r->is_array() || r->size() != 2 || !(*r)[0].is_number() || !(*r)[1].is_number())
      throw std::invalid_argument("data.moment_len_range must be [min, max]");
    d.moment_len_min = (*r)[0].get<double>();
    d.moment_len_max = (*r)[1].get<double>();
  }
  s.read("seed", d.seed);
}

void read_obs(const json& j, ObservationConfig& o) {
  Section s(j, "agent.observation");
  s.read("n_chunks", o.n_chunks);
  s.read("hidden_v", o.hidden_v);
  s.read("hidden_q", o.hidden_q);
  s.read("hidden_a", o.hidden_a);
  s.read("hidden_l", o.hidden_l);
  s.read("o_dim", o.o_dim);
}

void read_agent(const json& j, AgentConfig& a) {
  Section s(j, "agent");
  s.read("steps", a.steps);
  s.read("step_size", a.step_size);
  s.read("f0", a.f0);
  if (const json* o = s.child("offsets")) {
    if (!o->is_array() || o->size() != kNumOffsets)
      throw std::invalid_argument("agent.offsets must be an array of 6 numbers");
    for (std::size_t i = 0; i < kNumOffsets; ++i) {
      if (!(*o)[i].is_number()) throw std::invalid_argument("agent.offsets must be numbers");
      a.offsets[i] = (*o)[i].get<double>();
    }
  }
  s.read("shift_large", a.shift_large);
  s.read("shift_small", a.shift_small);
  s.read("policy_hidden", a.policy_hidden);
  if (const json* o = s.child("observation")) read_obs(*o, a.obs);
}

void read_reward(const json& j, RewardConfig& r) {
  Section s(j, "reward");
  s.read("rho", r.rho);
  s.read("beta", r.beta);
  s.read("theta", r.theta);
  s.read("branch_as_printed", r.branch_as_printed);
}

void read_optim(const json& j, OptimConfig& o) {
  Section s(j, "optim");
  s.read("lr", o.adam.lr);
  s.read("beta1", o.adam.beta1);
  s.read("beta2", o.adam.beta2);
  s.read("eps", o.adam.eps);
  s.read("clip_norm", o.clip_norm);
}

void read_weights(const json& j, LossWeights& w) {
  Section s(j, "train.loss_weights");
  s.read("evi", w.evi);
  s.read("iou", w.iou);
  s.read("dist", w.dist);
  s.read("loc", w.loc);
  s.read("policy", w.policy);
  s.read("value", w.value);
  s.read("trust", w.trust);
}

void read_train(const json& j, TrainConfig& t) {
  Section s(j, "train");
  s.read("epochs", t.epochs);
  s.read("discount", t.discount);
  s.read("batch_size", t.batch_size);
  s.read("eval_each_epoch", t.eval_each_epoch);
  if (const json* w = s.child("loss_weights")) read_weights(*w, t.weights);
}

void read_fusion(const json& j, FusionConfig& f) {
  Section s(j, "fusion");
  s.read("evi_hidden", f.evi_hidden);
  s.read("iou_hidden", f.iou_hidden);
  s.read("loc_hidden", f.loc_hidden);
  s.read("gru_hidden", f.gru_hidden);
  s.read("trust_hidden", f.trust_hidden);
  s.read("zero_evidence", f.zero_evidence);
  s.read("zero_iou", f.zero_iou);
  s.read("zero_boundary", f.zero_boundary);
  s.read("stop_gradient", f.stop_gradient);
}

void read_retrieval(const json& j, RetrievalConfig& r) {
  Section s(j, "retrieval");
  s.read("pool_size", r.pool_size);
  s.read("num_queries", r.num_queries);
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig cfg = default_config();
  {
    Section s(j, "");
    bool data_seed_given = false;
    s.read("seed", cfg.seed);
    if (const json* d = s.child("data")) {
      data_seed_given = d->is_object() && d->contains("seed");
      read_data(*d, cfg.data);
    }
    if (!data_seed_given) cfg.data.seed = cfg.seed;
    if (const json* a = s.child("agent")) read_agent(*a, cfg.agent);
    if (const json* r = s.child("reward")) read_reward(*r, cfg.reward);
    if (const json* o = s.child("optim")) read_optim(*o, cfg.optim);
    if (const json* t = s.child("train")) read_train(*t, cfg.train);
    if (const json* f = s.child("fusion")) read_fusion(*f, cfg.fusion);
    if (const json* r = s.child("retrieval")) read_retrieval(*r, cfg.retrieval);
    std::string objective(to_string(cfg.oos_objective));
    s.read("oos_objective", objective);
    cfg.oos_objective = oos_objective_from_string(objective);
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const RunConfig& c) {
  const auto& o = c.agent.obs;
  const auto& w = c.train.weights;
  return json{
      {"seed", c.seed},
      {"data",
       {{"n_train", c.data.n_train},
        {"n_val", c.data.n_val},
        {"n_test", c.data.n_test},
        {"oos_fraction", c.data.oos_fraction},
        {"n_frames", c.data.n_frames},
        {"d_v", c.data.d_v},
        {"d_q", c.data.d_q},
        {"signal_noise_sigma", c.data.signal_noise_sigma},
        {"moment_len_range", {c.data.moment_len_min, c.data.moment_len_max}},
        {"seed", c.data.seed}}},
      {"agent",
       {{"steps", c.agent.steps},
        {"step_size", c.agent.step_size},
        {"f0", c.agent.f0},
        {"offsets", c.agent.offsets},
        {"shift_large", c.agent.shift_large},
        {"shift_small", c.agent.shift_small},
        {"policy_hidden", c.agent.policy_hidden},
        {"observation",
         {{"n_chunks", o.n_chunks},
          {"hidden_v", o.hidden_v},
          {"hidden_q", o.hidden_q},
          {"hidden_a", o.hidden_a},
          {"hidden_l", o.hidden_l},
          {"o_dim", o.o_dim}}}}},
      {"reward",
       {{"rho", c.reward.rho},
        {"beta", c.reward.beta},
        {"theta", c.reward.theta},
        {"branch_as_printed", c.reward.branch_as_printed}}},
      {"optim",
       {{"lr", c.optim.adam.lr},
        {"beta1", c.optim.adam.beta1},
        {"beta2", c.optim.adam.beta2},
        {"eps", c.optim.adam.eps},
        {"clip_norm", c.optim.clip_norm}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"discount", c.train.discount},
        {"batch_size", c.train.batch_size},
        {"eval_each_epoch", c.train.eval_each_epoch},
        {"loss_weights",
         {{"evi", w.evi},
          {"iou", w.iou},
          {"dist", w.dist},
          {"loc", w.loc},
          {"policy", w.policy},
          {"value", w.value},
          {"trust", w.trust}}}}},
      {"fusion",
       {{"evi_hidden", c.fusion.evi_hidden},
        {"iou_hidden", c.fusion.iou_hidden},
        {"loc_hidden", c.fusion.loc_hidden},
        {"gru_hidden", c.fusion.gru_hidden},
        {"trust_hidden", c.fusion.trust_hidden},
        {"zero_evidence", c.fusion.zero_evidence},
        {"zero_iou", c.fusion.zero_iou},
        {"zero_boundary", c.fusion.zero_boundary},
        {"stop_gradient", c.fusion.stop_gradient}}},
      {"oos_objective", std::string(to_string(c.oos_objective))},
      {"retrieval", {{"pool_size", c.retrieval.pool_size}, {"num_queries", c.retrieval.num_queries}}},
  };
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace evmarl
