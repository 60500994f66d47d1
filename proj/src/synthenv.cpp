#include "evmarl/synthenv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace evmarl {

void DatasetConfig::validate() const {
  if (n_train < 0 || n_val < 0 || n_test < 0) throw std::invalid_argument("split sizes must be >= 0");
  if (!(oos_fraction >= 0.0 && oos_fraction <= 1.0))
    throw std::invalid_argument("oos_fraction must lie in [0,1]");
  if (n_frames < 1 || d_v < 1 || d_q < 1) throw std::invalid_argument("dimensions must be positive");
  if (!(moment_len_min > 0.0 && moment_len_min <= moment_len_max && moment_len_max <= 1.0))
    throw std::invalid_argument("moment_len_range must satisfy 0 < min <= max <= 1");
  if (!(signal_noise_sigma >= 0.0)) throw std::invalid_argument("signal_noise_sigma must be >= 0");
}

namespace {

std::uint64_t hash_id(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Rng stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

constexpr std::uint64_t kMapSalt = 0x6d61702d73616c74ULL;

Episode make_episode(const DatasetConfig& cfg, const Tensor& map, std::string id, bool oos) {
  Rng rng = stream(cfg.seed, hash_id(id));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = cfg.n_frames, dv = cfg.d_v, dq = cfg.d_q;

  Episode ep;
  ep.id = std::move(id);
  ep.oos = oos;
  ep.query.resize(static_cast<std::size_t>(dq));
  for (double& x : ep.query) x = normal(rng);

  int first = n, last = n;  // planted frames [first, last)
  if (!oos) {
    const double len = cfg.moment_len_min + (cfg.moment_len_max - cfg.moment_len_min) * unit(rng);
    const double start = (1.0 - len) * unit(rng);
    first = std::clamp(static_cast<int>(std::lround(start * n)), 0, n - 1);
    last = std::clamp(static_cast<int>(std::lround((start + len) * n)), first + 1, n);
    ep.gt = Interval{static_cast<double>(first) / n, static_cast<double>(last) / n};
  }

  std::vector<double> image(static_cast<std::size_t>(dv), 0.0);
  for (int r = 0; r < dv; ++r)
    for (int c = 0; c < dq; ++c) image[r] += map.values[r * dq + c] * ep.query[c];

  ep.frames = Tensor::zeros({static_cast<std::size_t>(n), static_cast<std::size_t>(dv)});
  for (int i = 0; i < n; ++i) {
    const bool planted = i >= first && i < last;
    for (int j = 0; j < dv; ++j) {
      const double eps = normal(rng);
      ep.frames.values[static_cast<std::size_t>(i * dv + j)] =
          planted ? image[j] + cfg.signal_noise_sigma * eps : eps;
    }
  }
  return ep;
}

std::vector<Episode> make_split(const DatasetConfig& cfg, const Tensor& map, const std::string& name,
                                int count, double oos_fraction) {
  const int n_oos = static_cast<int>(std::lround(oos_fraction * count));
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = stream(cfg.seed, hash_id("split:" + name));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_oos(static_cast<std::size_t>(count), false);
  for (int k = 0; k < n_oos; ++k) is_oos[order[k]] = true;

  std::vector<Episode> out;
  out.reserve(static_cast<std::size_t>(count));
  char buf[32];
  for (int i = 0; i < count; ++i) {
    std::snprintf(buf, sizeof(buf), "%s-%06d", name.c_str(), i);
    out.push_back(make_episode(cfg, map, buf, is_oos[i]));
  }
  return out;
}

}  // namespace

Tensor planting_map(const DatasetConfig& cfg) {
  Rng rng = stream(cfg.seed, kMapSalt);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.d_q)));
  Tensor map = Tensor::zeros({static_cast<std::size_t>(cfg.d_v), static_cast<std::size_t>(cfg.d_q)});
  for (double& x : map.values) x = normal(rng);
  return map;
}

Dataset generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const Tensor map = planting_map(cfg);
  Dataset ds;
  ds.train = make_split(cfg, map, "train", cfg.n_train, 0.0);
  ds.val = make_split(cfg, map, "val", cfg.n_val, cfg.oos_fraction);
  ds.test = make_split(cfg, map, "test", cfg.n_test, cfg.oos_fraction);
  return ds;
}

bool frame_inside(int i, int n_frames, const Interval& region) {
  const double center = (i + 0.5) / n_frames;
  return center >= region.start && center <= region.end;
}

std::vector<double> region_mean(const Episode& ep, const Interval& region, FeatureMode mode,
                                int* count) {
  const int n = ep.n_frames();
  const auto dv = static_cast<std::size_t>(ep.d_v());
  std::vector<double> mean(dv, 0.0);
  int used = 0;
  for (int i = 0; i < n; ++i) {
    if (frame_inside(i, n, region) != (mode == FeatureMode::Included)) continue;
    auto f = ep.frame(i);
    for (std::size_t j = 0; j < dv; ++j) mean[j] += f[j];
    ++used;
  }
  if (used > 0)
    for (double& x : mean) x /= used;
  if (count) *count = used;
  return mean;
}

std::vector<std::vector<double>> chunk_means(const Episode& ep, int n_chunks) {
  const int n = ep.n_frames();
  const int k = std::max(1, std::min(n_chunks, n));
  const auto dv = static_cast<std::size_t>(ep.d_v());
  std::vector<std::vector<double>> out(static_cast<std::size_t>(k), std::vector<double>(dv, 0.0));
  for (int c = 0; c < k; ++c) {
    const int lo = c * n / k, hi = (c + 1) * n / k;
    for (int i = lo; i < hi; ++i) {
      auto f = ep.frame(i);
      for (std::size_t j = 0; j < dv; ++j) out[c][j] += f[j];
    }
    for (double& x : out[c]) x /= (hi - lo);
  }
  return out;
}

ObservationNet make_observation_net(ParameterStore& store, const std::string& prefix,
                                    const ObservationConfig& cfg, int d_v, int d_q) {
  ObservationNet net;
  net.cfg = cfg;
  const auto dv = static_cast<std::size_t>(d_v), dq = static_cast<std::size_t>(d_q);
  net.query_image = make_dense(store, prefix + "obs.query_image", dq, dv, Activation::Identity);
  net.video = make_gru(store, prefix + "obs.video_gru", dv, static_cast<std::size_t>(cfg.hidden_v));
  net.query_enc = make_dense(store, prefix + "obs.query_enc", dq, static_cast<std::size_t>(cfg.hidden_q),
                             Activation::Tanh);
  net.local = make_dense(store, prefix + "obs.local", dv, static_cast<std::size_t>(cfg.hidden_a),
                         Activation::ReLU);
  net.location = make_dense(store, prefix + "obs.location", 2, static_cast<std::size_t>(cfg.hidden_l),
                            Activation::ReLU);
  const auto concat_dim = static_cast<std::size_t>(cfg.hidden_v + cfg.hidden_q + cfg.hidden_a + cfg.hidden_l);
  net.fc_o = make_dense(store, prefix + "obs.fc_o", concat_dim, static_cast<std::size_t>(cfg.o_dim),
                        Activation::ReLU);
  return net;
}

Var pooled_video_feature(Tape& tape, const ObservationNet& net, const Episode& ep, Var query_image) {
  std::vector<double> zeros(net.video.hidden, 0.0);
  Var h = tape.input(zeros);
  for (const auto& chunk : chunk_means(ep, net.cfg.n_chunks))
    h = gru_step(tape, net.video, tape.mul(tape.input(chunk), query_image), h);
  return h;
}

Tensor pooled_video_feature(const Episode& ep, const ParameterStore& store, const ObservationNet& net) {
  Tape tape(store);
  Var qi = dense(tape, net.query_image, tape.input(ep.query));
  auto v = tape.value(pooled_video_feature(tape, net, ep, qi));
  return Tensor::vector({v.begin(), v.end()});
}

EpisodeEncoding encode_episode(Tape& tape, const ObservationNet& net, const Episode& ep) {
  EpisodeEncoding enc;
  Var q = tape.input(ep.query);
  enc.query_image = dense(tape, net.query_image, q);
  enc.query = dense(tape, net.query_enc, q);
  enc.video = pooled_video_feature(tape, net, ep, enc.query_image);
  return enc;
}

Var local_feature(Tape& tape, const ObservationNet& net, const EpisodeEncoding& enc,
                  const Episode& ep, const Interval& region, FeatureMode mode) {
  Var mean = tape.input(region_mean(ep, region, mode));
  return dense(tape, net.local, tape.mul(mean, enc.query_image));
}

Var assemble_observation(Tape& tape, const ObservationNet& net, const EpisodeEncoding& enc,
                         const Episode& ep, const Interval& region, FeatureMode mode) {
  const double loc[2] = {region.start, region.end};
  Var a = local_feature(tape, net, enc, ep, region, mode);
  Var l = dense(tape, net.location, tape.input(loc));
  return dense(tape, net.fc_o, tape.concat({enc.video, enc.query, a, l}));
}

Tensor assemble_observation(const Episode& ep, const Interval& region, FeatureMode mode,
                            const ParameterStore& store, const ObservationNet& net) {
  Tape tape(store);
  const EpisodeEncoding enc = encode_episode(tape, net, ep);
  auto o = tape.value(assemble_observation(tape, net, enc, ep, region, mode));
  return Tensor::vector({o.begin(), o.end()});
}

}  // namespace evmarl
