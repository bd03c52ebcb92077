#include "eraloc/retrieve.hpp"

#include <limits>

namespace eraloc {

const char* session_status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::NotReady: return "not-ready";
    case SessionStatus::Estimated: return "estimated";
    case SessionStatus::Adapted: return "adapted";
  }
  return "not-ready";
}

Session::Session(std::shared_ptr<const RetrievalIndex> archive, SessionConfig cfg)
    : archive_(std::move(archive)), cfg_(cfg) {
  if (!archive_) fail(ErrorCode::InvalidInput, "session needs an archive index");
  if (archive_->mode() != RetrievalIndex::Mode::Raw) fail(ErrorCode::InvalidInput, "session archive must be a raw index");
  if (cfg_.feedback_size < 1) fail(ErrorCode::InvalidInput, "feedback size must be >= 1");
  if (cfg_.min_dim_images <= cfg_.mle_k_max)
    fail(ErrorCode::InvalidInput, "min_dim_images must exceed the MLE neighbor count");
}

SessionStatus Session::status() const {
  if (alignment_) return SessionStatus::Adapted;
  if (d_hat_s_ && d_hat_t_) return SessionStatus::Estimated;
  return SessionStatus::NotReady;
}

Session Session::with_query(const std::string& id, const Vector& v) const {
  if (v.size() != archive_->raw_dim()) fail(ErrorCode::InvalidInput, "query dimension does not match archive");
  if (queries_.count(id)) return *this;
  Session s = *this;
  s.queries_.emplace(id, std::make_shared<const Vector>(l2_normalized(v)));
  s.query_order_.push_back(id);
  return s;
}

Session Session::record_feedback(const FeedbackRound& fb) const {
  if (static_cast<int>(fb.selected_ids.size()) != cfg_.feedback_size)
    fail(ErrorCode::InvalidFeedback, "feedback must select exactly " + std::to_string(cfg_.feedback_size) + " items, got " +
                                         std::to_string(fb.selected_ids.size()));
  std::set<std::string> distinct(fb.selected_ids.begin(), fb.selected_ids.end());
  if (distinct.size() != fb.selected_ids.size()) fail(ErrorCode::InvalidFeedback, "feedback selections must be distinct");
  if (!queries_.count(fb.query_id)) fail(ErrorCode::InvalidInput, "query " + fb.query_id + " was not issued in this session");
  for (const auto& id : fb.selected_ids)
    if (!archive_->find(id)) fail(ErrorCode::InvalidInput, "unknown archive id " + id);

  Session s = *this;
  FeedbackRound r = fb;
  r.round = static_cast<int>(feedback_.size()) + 1;
  s.feedback_.push_back(std::move(r));
  bool seen = false;
  for (const auto& q : answered_)
    if (q == fb.query_id) seen = true;
  if (!seen) s.answered_.push_back(fb.query_id);
  for (const auto& id : fb.selected_ids)
    if (s.source_set_.insert(id).second) s.source_order_.push_back(id);
  return s;
}

Matrix Session::source_matrix() const {
  Matrix m(static_cast<Eigen::Index>(source_order_.size()), archive_->raw_dim());
  for (std::size_t i = 0; i < source_order_.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = archive_->raw_vector(*archive_->find(source_order_[i])).transpose();
  return m;
}

Matrix Session::query_matrix() const {
  Matrix m(static_cast<Eigen::Index>(answered_.size()), archive_->raw_dim());
  for (std::size_t i = 0; i < answered_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = queries_.at(answered_[i])->transpose();
  return m;
}

bool Session::dims_ready() const {
  auto need = static_cast<std::size_t>(cfg_.min_dim_images);
  return n_s() >= need && n_t() >= need;
}

Session Session::estimate_dims() const {
  if (d_hat_s_ && d_hat_t_) return *this;
  if (!dims_ready())
    fail(ErrorCode::NotReady, "dimension estimation needs " + std::to_string(cfg_.min_dim_images) +
                                  " distinct images per domain (have " + std::to_string(n_s()) + " source, " +
                                  std::to_string(n_t()) + " queries)");
  // Everything collected so far; at the first opportunity that is at least
  // min_dim_images per domain.
  Session s = *this;
  s.d_hat_s_ = estimate_dim_mle(source_matrix(), cfg_.mle_k_min, cfg_.mle_k_max);
  s.d_hat_t_ = estimate_dim_mle(query_matrix(), cfg_.mle_k_min, cfg_.mle_k_max);
  return s;
}

bool Session::should_learn() const {
  if (!d_hat_s_ || !d_hat_t_) return false;
  if (n_s() <= static_cast<std::size_t>(d_hat_s_->rounded) || n_t() <= static_cast<std::size_t>(d_hat_t_->rounded)) return false;
  if (!alignment_) return true;
  if (cfg_.relearn_every <= 0) return false;
  return n_t() > alignment_->n_t && n_t() % static_cast<std::size_t>(cfg_.relearn_every) == 0;
}

std::shared_ptr<const Alignment> Session::prepare_alignment() const {
  if (!d_hat_s_ || !d_hat_t_) fail(ErrorCode::NotReady, "dimensions not estimated yet");
  try {
    Subspace src = fit_pca(source_matrix(), d_hat_s_->rounded);
    Subspace tgt = fit_pca(query_matrix(), d_hat_t_->rounded);
    Vector eig = tgt.eigenvalues;
    auto space = make_adapted_space(learn_sa(src, tgt), eig);
    auto a = std::make_shared<Alignment>();
    a->hash = model_hash(space->model);
    a->index = std::make_shared<const RetrievalIndex>(archive_->adapted(space));
    a->space = std::move(space);
    a->d_source = d_hat_s_->rounded;
    a->d_target = d_hat_t_->rounded;
    a->n_s = n_s();
    a->n_t = n_t();
    a->round = round();
    return a;
  } catch (const Error& e) {
    fail(ErrorCode::AdaptationFailed, std::string("adaptation failed: ") + e.what());
  }
}

Session Session::with_alignment(std::shared_ptr<const Alignment> a) const {
  Session s = *this;
  s.alignment_ = std::move(a);
  s.last_error_.reset();
  return s;
}

Session Session::with_failure(const std::string& message) const {
  Session s = *this;
  s.last_error_ = message;
  return s;
}

Session Session::advance() const {
  Session s = *this;
  if (!(s.d_hat_s_ && s.d_hat_t_) && s.dims_ready()) s = s.estimate_dims();
  if (!s.should_learn()) return s;
  try {
    return s.with_alignment(s.prepare_alignment());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AdaptationFailed) throw;
    return s.with_failure(e.what());
  }
}

std::vector<Hit> Session::query(const Vector& q, std::size_t k, bool adapted) const {
  if (adapted && alignment_) return alignment_->index->query(q, k);
  return archive_->query(q, k);
}

Vector Session::baseline_probe(const Vector& q) const {
  if (answered_.empty()) fail(ErrorCode::NotReady, "baseline needs at least one query with feedback");
  if (q.size() != archive_->raw_dim()) fail(ErrorCode::InvalidInput, "query dimension does not match archive");
  Vector qn = l2_normalized(q);
  // nearest accumulated query; its most recent feedback round supplies the probe
  std::string best_id;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& id : answered_) {
    double d = (*queries_.at(id) - qn).norm();
    if (d < best) {
      best = d;
      best_id = id;
    }
  }
  const FeedbackRound* fb = nullptr;
  for (const auto& r : feedback_)
    if (r.query_id == best_id) fb = &r;
  Vector probe = Vector::Zero(archive_->raw_dim());
  for (const auto& id : fb->selected_ids) probe += archive_->raw_vector(*archive_->find(id));
  return probe / static_cast<double>(fb->selected_ids.size());
}

std::vector<Hit> Session::baseline_query(const Vector& q, std::size_t k) const {
  return archive_->query(baseline_probe(q), k);
}

}  // namespace eraloc
