#pragma once

#include "eraloc/adapt.hpp"
#include "eraloc/common.hpp"
#include "eraloc/linalg.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace eraloc {

struct Hit {
  std::string id;
  Eigen::Index row = 0;
  double score = 0.0;
};

// Everything needed to send vectors into the whitened target subspace.
struct AdaptedSpace {
  SaModel model;
  Vector eigenvalues;  // whitening eigenvalues (query-side PCA)
  Vector scale;        // 1/sqrt(eigenvalues), floored
};

std::shared_ptr<const AdaptedSpace> make_adapted_space(SaModel model, const Vector& eigenvalues);

class RetrievalIndex {
 public:
  enum class Mode { Raw, Adapted };

  // Raw-mode index over the L2-normalized store rows, held as float32.
  static RetrievalIndex build(const FeatureMatrix& store);

  // Same archive, Adapted mode. Archive rows are mapped eagerly.
  RetrievalIndex adapted(std::shared_ptr<const AdaptedSpace> space) const;

  Mode mode() const { return adapted_ ? Mode::Adapted : Mode::Raw; }
  Eigen::Index size() const;
  Eigen::Index raw_dim() const;
  Eigen::Index dim() const;  // D in Raw mode, d_T in Adapted mode
  const std::string& id(Eigen::Index row) const;
  std::optional<Eigen::Index> find(const std::string& id) const;
  const std::optional<std::vector<std::string>>& labels() const;
  bool is_distractor(Eigen::Index row) const;
  // Normalized archive vector, as stored.
  Vector raw_vector(Eigen::Index row) const;
  const std::shared_ptr<const AdaptedSpace>& space() const;

  // Ranked hits for a raw-space query (D-vector); Adapted mode projects the
  // query internally. k larger than the index truncates. With lazy = true
  // archive rows are mapped per query instead of read from the eager table.
  std::vector<Hit> query(const Vector& q, std::size_t k, bool lazy = false) const;
  // Scores for every archive row, in row order.
  std::vector<double> scores(const Vector& q, bool lazy = false) const;
  // Row indices sorted by (score, id).
  std::vector<Eigen::Index> rank_all(const Vector& q) const;

  // Bytes held by the vector tables and model of this mode.
  std::size_t adapted_bytes() const;
  std::size_t raw_bytes() const;

 private:
  struct RawData;
  struct AdaptedData;
  std::shared_ptr<const RawData> raw_;
  std::shared_ptr<const AdaptedData> adapted_;

  std::vector<float> prepare(const Vector& q) const;
  std::vector<float> map_archive_row(Eigen::Index row) const;
  std::vector<Hit> top(const std::vector<double>& s, std::size_t k) const;
};

// ---- interactive session ----

struct SessionConfig {
  int feedback_size = 3;
  int min_dim_images = 15;
  int mle_k_min = 6;
  int mle_k_max = 12;
  // Re-learn the alignment whenever the distinct query count reaches a
  // multiple of this value after the first learn. 0 disables re-learning.
  int relearn_every = 0;
};

struct FeedbackRound {
  std::string query_id;
  std::vector<std::string> selected_ids;
  int round = 0;
};

struct Alignment {
  std::shared_ptr<const AdaptedSpace> space;
  std::shared_ptr<const RetrievalIndex> index;
  std::uint64_t hash = 0;
  int d_source = 0;
  int d_target = 0;
  std::size_t n_s = 0;  // counters at learn time
  std::size_t n_t = 0;
  int round = 0;
};

enum class SessionStatus { NotReady, Estimated, Adapted };
const char* session_status_name(SessionStatus s);

// Immutable value; every update returns a new Session sharing unchanged state.
class Session {
 public:
  Session(std::shared_ptr<const RetrievalIndex> archive, SessionConfig cfg = {});

  const SessionConfig& config() const { return cfg_; }
  const RetrievalIndex& archive() const { return *archive_; }
  std::shared_ptr<const RetrievalIndex> archive_ptr() const { return archive_; }

  std::size_t n_s() const { return source_order_.size(); }
  std::size_t n_t() const { return answered_.size(); }
  int round() const { return static_cast<int>(feedback_.size()); }
  const std::optional<DimEstimate>& d_hat_s() const { return d_hat_s_; }
  const std::optional<DimEstimate>& d_hat_t() const { return d_hat_t_; }
  const std::shared_ptr<const Alignment>& alignment() const { return alignment_; }
  const std::vector<FeedbackRound>& feedback() const { return feedback_; }
  const std::vector<std::string>& source_ids() const { return source_order_; }
  const std::optional<std::string>& last_error() const { return last_error_; }
  SessionStatus status() const;
  bool has_query(const std::string& id) const { return queries_.count(id) > 0; }

  // Registers an issued query (first issue of an id wins; vector L2-normalized).
  Session with_query(const std::string& id, const Vector& v) const;
  // Validates and appends a feedback round. Does not estimate or learn.
  Session record_feedback(const FeedbackRound& fb) const;
  // MLE per domain over all collected distinct vectors; NotReady error when
  // either domain has fewer than min_dim_images.
  Session estimate_dims() const;
  bool dims_ready() const;
  // n_s > d_hat_s and n_t > d_hat_t, and (no model yet, or re-learning due).
  bool should_learn() const;
  // Expensive and pure: fits both subspaces, learns SA and maps the archive.
  std::shared_ptr<const Alignment> prepare_alignment() const;
  Session with_alignment(std::shared_ptr<const Alignment> a) const;
  Session with_failure(const std::string& message) const;
  // estimate_dims when possible, then learn if should_learn(); failures leave Raw mode.
  Session advance() const;

  std::vector<Hit> query(const Vector& q, std::size_t k, bool adapted = true) const;
  std::vector<Hit> baseline_query(const Vector& q, std::size_t k) const;
  // Probe vector of the naive neighbor baseline.
  Vector baseline_probe(const Vector& q) const;

  Matrix source_matrix() const;
  Matrix query_matrix() const;

 private:
  std::shared_ptr<const RetrievalIndex> archive_;
  SessionConfig cfg_;
  std::map<std::string, std::shared_ptr<const Vector>> queries_;
  std::vector<std::string> query_order_;
  std::vector<std::string> answered_;  // distinct query ids with feedback, in order
  std::vector<FeedbackRound> feedback_;
  std::vector<std::string> source_order_;
  std::set<std::string> source_set_;
  std::optional<DimEstimate> d_hat_s_, d_hat_t_;
  std::shared_ptr<const Alignment> alignment_;
  std::optional<std::string> last_error_;
};

// ---- simulation ----

struct SimulationConfig {
  std::size_t schedule_length = 60;
  std::size_t top_k = 50;  // results shown to the simulated user
  int repetitions = 10;
  std::uint64_t seed = 0;
  double noise = 0.0;  // probability that a selection is replaced by a non-relevant item
  SessionConfig session;
};

struct CurvePoint {
  std::size_t queries = 0;
  double map = 0.0;
  bool adapted = false;
};

struct RepetitionReport {
  double before = 0.0;
  double after = 0.0;
  double baseline = 0.0;
  bool adapted = false;
  std::size_t trigger_queries = 0;  // distinct queries when first learned
  int d_hat_s = 0, d_hat_t = 0;
  std::uint64_t model_hash = 0;
  std::size_t n_s = 0, n_t = 0;
  std::vector<CurvePoint> curve;
};

struct SessionReport {
  std::vector<RepetitionReport> reps;
  double before_mean = 0, before_std = 0;
  double after_mean = 0, after_std = 0;
  double baseline_mean = 0, baseline_std = 0;
  std::vector<CurvePoint> mean_curve;
  std::size_t skipped_queries = 0;
};

// Relevance: same label, not a distractor. Mean AP is class-averaged over the
// held-out queries (those not in the schedule).
SessionReport simulate_session(const FeatureMatrix& archive, const FeatureMatrix& queries, const SimulationConfig& cfg);

// Query rows with at least feedback_size relevant archive items; the rest are
// reported on stderr and counted in *skipped.
std::vector<std::size_t> usable_queries(const FeatureMatrix& archive, const FeatureMatrix& queries, int feedback_size,
                                        std::size_t* skipped = nullptr);
// Schedule (first schedule_length of a seeded permutation) and held-out rows
// of one repetition. Oracle selections at step i use
// derive_seed(repetition_seed(cfg, rep), i + 1).
std::uint64_t repetition_seed(const SimulationConfig& cfg, int rep);
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> repetition_split(const std::vector<std::size_t>& usable,
                                                                               const SimulationConfig& cfg, int rep);

// Ranker callback: full ranked row list for a query vector.
double held_out_map(const RetrievalIndex& archive, const FeatureMatrix& queries, const std::vector<std::size_t>& eval,
                    const std::function<std::vector<Eigen::Index>(const Vector&)>& ranker);

// Selection of the cooperative (optionally noisy) user for one result list.
std::vector<std::string> oracle_select(const RetrievalIndex& archive, const std::vector<Hit>& results,
                                       const std::string& label, int count, double noise, std::uint64_t seed);

}  // namespace eraloc
