#pragma once

// Synthetic corpora with known structure, shared by unit and acceptance tests.

#include "eraloc/common.hpp"
#include "eraloc/rng.hpp"

namespace eraloc::synth {

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sigma = 1.0);
// D x d matrix with orthonormal columns.
Matrix random_orthonormal(Rng& rng, Eigen::Index D, Eigen::Index d);

// n points uniform on the unit m-cube, embedded isometrically in R^D.
Matrix uniform_manifold(std::uint64_t seed, Eigen::Index n, Eigen::Index m, Eigen::Index D = 10);

// Two labeled domains; the target is the source distribution rotated by a
// random orthogonal map acting on a `rotated`-dim subspace, plus noise.
struct ShiftParams {
  int classes = 10;
  Eigen::Index dim = 100;
  Eigen::Index rotated = 20;
  int per_class = 40;
  Eigen::Index signal_dims = 14;
  Eigen::Index rotated_signal = 6;  // signal directions inside the rotated subspace
  double offset = 5.0;
  double spread = 1.0;
  double within = 0.5;
  double noise = 0.1;
};

struct ShiftCorpus {
  FeatureMatrix source;
  FeatureMatrix target;
  Matrix rotation;
};

ShiftCorpus make_shift_corpus(std::uint64_t seed, const ShiftParams& p = {});

// Labeled archive (modern images plus distractors) and labeled queries
// from the shifted domain, all rows L2-normalized.
struct RetrievalParams {
  int classes = 25;
  Eigen::Index dim = 128;
  Eigen::Index rotated = 16;
  Eigen::Index signal_dims = 6;
  int archive_per_class = 11;
  int queries_per_class = 9;
  int distractors = 10000;
  double offset = 5.0;
  double spread = 3.0;
  double within = 0.5;
  double noise = 0.1;
  double distractor_spread = 1.5;
  double distractor_within = 1.0;
};

struct RetrievalCorpus {
  FeatureMatrix archive;
  FeatureMatrix queries;
};

RetrievalCorpus make_retrieval_corpus(std::uint64_t seed, const RetrievalParams& p = {});

}  // namespace eraloc::synth
