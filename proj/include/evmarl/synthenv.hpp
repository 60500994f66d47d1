#pragma once

// Seeded synthetic moment-localization episodes and the observation network
// that turns (video, query, region) into a state vector.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evmarl/core.hpp"
#include "evmarl/diffcomp.hpp"

namespace evmarl {

struct DatasetConfig {
  int n_train = 2000;
  int n_val = 1000;
  int n_test = 1000;
  /// Fraction of OOS episodes in val and test. Train is always fully matched.
  double oos_fraction = 0.3;
  int n_frames = 64;
  int d_v = 32;
  int d_q = 16;
  double signal_noise_sigma = 0.5;
  double moment_len_min = 0.1;
  double moment_len_max = 0.4;
  std::uint64_t seed = 42;

  void validate() const;
  bool operator==(const DatasetConfig&) const = default;
};

struct Episode {
  std::string id;
  Tensor frames;  // [n_frames, d_v]
  std::vector<double> query;
  std::optional<Interval> gt;
  bool oos = false;

  int n_frames() const { return static_cast<int>(frames.shape.at(0)); }
  int d_v() const { return static_cast<int>(frames.shape.at(1)); }
  std::span<const double> frame(int i) const {
    return {frames.values.data() + static_cast<std::size_t>(i) * frames.shape[1], frames.shape[1]};
  }
};

struct Dataset {
  std::vector<Episode> train;
  std::vector<Episode> val;
  std::vector<Episode> test;
};

/// The fixed [d_v, d_q] map that plants a query's image into its moment.
Tensor planting_map(const DatasetConfig& cfg);

/// Deterministic per seed. Matched episodes carry a contiguous run of frames
/// equal to planting_map * query plus N(0, sigma^2) noise; every other frame
/// is N(0, 1).
Dataset generate_dataset(const DatasetConfig& cfg);

/// Frame i covers [i/n, (i+1)/n) and is inside a region iff its center is.
bool frame_inside(int i, int n_frames, const Interval& region);

enum class FeatureMode { Included, Excluded };

/// Mean of the frames inside (Included) or outside (Excluded) a region; zero
/// when the selection is empty. Also reports how many frames were averaged.
std::vector<double> region_mean(const Episode& ep, const Interval& region, FeatureMode mode,
                                int* count = nullptr);

/// Chunk means used as the recurrent video encoder's input sequence.
std::vector<std::vector<double>> chunk_means(const Episode& ep, int n_chunks);

struct ObservationConfig {
  int n_chunks = 16;
  int hidden_v = 32;
  int hidden_q = 16;
  int hidden_a = 32;
  int hidden_l = 16;
  int o_dim = 64;

  bool operator==(const ObservationConfig&) const = default;
};

struct ObservationNet {
  Dense query_image;  // d_q -> d_v, query projected into frame space
  GruCell video;      // chunk features -> V
  Dense query_enc;    // d_q -> Q
  Dense local;        // fused region feature -> A_t
  Dense location;     // (start, end) -> L_t
  Dense fc_o;         // V + Q + A_t + L_t -> O_t
  ObservationConfig cfg;
};

ObservationNet make_observation_net(ParameterStore& store, const std::string& prefix,
                                    const ObservationConfig& cfg, int d_v, int d_q);

/// Per-episode quantities shared by every step of a rollout.
struct EpisodeEncoding {
  Var video;        // V
  Var query;        // Q
  Var query_image;  // projection used for multiplicative fusion
};

EpisodeEncoding encode_episode(Tape& tape, const ObservationNet& net, const Episode& ep);

/// Global video feature: chunk means modulated by the query image, run through
/// a GRU; returns the last hidden state.
Var pooled_video_feature(Tape& tape, const ObservationNet& net, const Episode& ep, Var query_image);
Tensor pooled_video_feature(const Episode& ep, const ParameterStore& store, const ObservationNet& net);

/// Region mean fused with the query (elementwise product then dense layer).
Var local_feature(Tape& tape, const ObservationNet& net, const EpisodeEncoding& enc,
                  const Episode& ep, const Interval& region, FeatureMode mode);

Var assemble_observation(Tape& tape, const ObservationNet& net, const EpisodeEncoding& enc,
                         const Episode& ep, const Interval& region, FeatureMode mode);
Tensor assemble_observation(const Episode& ep, const Interval& region, FeatureMode mode,
                            const ParameterStore& store, const ObservationNet& net);

}  // namespace evmarl
