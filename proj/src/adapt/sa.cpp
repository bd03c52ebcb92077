#include "eraloc/adapt.hpp"

namespace eraloc {

SaModel learn_sa(const Subspace& source, const Subspace& target) {
  if (source.ambient() != target.ambient())
    fail(ErrorCode::InvalidInput, "source and target subspaces live in different dimensions");
  SaModel model;
  model.source = source;
  model.target = target;
  model.m = source.basis.transpose() * target.basis;
  model.x_a = source.basis * model.m;
  return model;
}

namespace {
void check_dim(const SaModel& model, const Vector& x) {
  if (x.size() != model.ambient())
    fail(ErrorCode::InvalidInput, "vector dimension " + std::to_string(x.size()) +
                                      " does not match model dimension " +
                                      std::to_string(model.ambient()));
}
}  // namespace

Vector map_source(const SaModel& model, const Vector& x) {
  check_dim(model, x);
  return model.x_a.transpose() * (x - model.source.mean);
}

Vector map_target(const SaModel& model, const Vector& x) {
  check_dim(model, x);
  return model.target.basis.transpose() * (x - model.target.mean);
}

Matrix map_source_rows(const SaModel& model, const Matrix& x) {
  if (x.cols() != model.ambient()) fail(ErrorCode::InvalidInput, "row dimension mismatch");
  return (x.rowwise() - model.source.mean.transpose()) * model.x_a;
}

Matrix map_target_rows(const SaModel& model, const Matrix& x) {
  if (x.cols() != model.ambient()) fail(ErrorCode::InvalidInput, "row dimension mismatch");
  return (x.rowwise() - model.target.mean.transpose()) * model.target.basis;
}

double sa_similarity(const Vector& x_s, const Vector& x_t, const SaModel& model) {
  return map_source(model, x_s).dot(map_target(model, x_t));
}

double esa_distance(const Vector& x_s, const Vector& x_t, const SaModel& model) {
  return (map_source(model, x_s) - map_target(model, x_t)).norm();
}

}  // namespace eraloc
