#include "eraloc/eraloc.h"

#include "eraloc/corpus.hpp"
#include "eraloc/encode.hpp"
#include "eraloc/eval.hpp"
#include "eraloc/retrieve.hpp"

#include "../service/service.hpp"

#include <json.hpp>

#include <cstring>
#include <map>

using nlohmann::json;
using namespace eraloc;

struct eraloc_features {
  FeatureMatrix f;
  Scheme scheme = Scheme::Raw;
};
struct eraloc_model {
  AnyModel m;
};
struct eraloc_index {
  std::shared_ptr<const RetrievalIndex> index;
};
struct eraloc_service {
  std::unique_ptr<service::Service> svc;
};

namespace {

thread_local std::string last_error;

struct OptionsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class F>
eraloc_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return ERALOC_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return static_cast<eraloc_status>(static_cast<int>(e.code()));
  } catch (const OptionsError& e) {
    last_error = e.what();
    return ERALOC_INVALID_OPTIONS;
  } catch (const json::exception& e) {
    last_error = std::string("bad options: ") + e.what();
    return ERALOC_INVALID_OPTIONS;
  } catch (const std::exception& e) {
    last_error = e.what();
    return ERALOC_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return ERALOC_INTERNAL;
  }
}

template <class T>
const T& need(const T* p, const char* what) {
  if (!p) throw OptionsError(std::string("null ") + what);
  return *p;
}

std::string cstr(const char* p, const char* what) {
  if (!p) throw OptionsError(std::string("null ") + what);
  return p;
}

template <class T>
void need_out(T** out) {
  if (!out) throw OptionsError("null output pointer");
}

json parse_options(const char* options) {
  if (!options || !*options) return json::object();
  json j = json::parse(options);
  if (!j.is_object()) throw OptionsError("options must be a JSON object");
  return j;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(const json& j, char** out) {
  need_out(out);
  *out = dup(j.dump(2) + "\n");
}

// Training on a uniform sample of descriptors when "sample" is set.
Matrix training_rows(const FeatureMatrix& d, const json& o) {
  std::size_t sample = o.value("sample", std::size_t{0});
  if (sample == 0 || sample >= static_cast<std::size_t>(d.size())) return d.rows;
  return sample_descriptors({d}, sample, o.value("seed", std::uint64_t{0})).rows;
}

const char* domain_name(Domain d) { return d == Domain::Target ? "target" : "source"; }

AlignmentModel as_alignment(const eraloc_model* m) {
  AlignmentModel a;
  if (!m) return a;
  if (auto* sa = std::get_if<SaModel>(&m->m)) {
    a.method = AdaptMethod::Esa;
    a.sa = *sa;
  } else if (auto* g = std::get_if<GfkModel>(&m->m)) {
    a.method = AdaptMethod::Gfk;
    a.gfk = *g;
  } else {
    fail(ErrorCode::MissingModel, std::string("a ") + model_kind_name(kind_of(m->m)) + " model is not an alignment");
  }
  return a;
}

Metric metric_for(const json& o, const AlignmentModel& a) {
  if (o.contains("metric")) return parse_metric(o.at("metric"));
  if (a.sa) return Metric::EsaDist;
  if (a.gfk) return Metric::GfkSim;
  return Metric::Euclidean;
}

Direction direction_of(const json& o) {
  std::string d = o.value("direction", "auto");
  if (d == "auto") return Direction::Auto;
  if (d == "minimize") return Direction::Minimize;
  if (d == "maximize") return Direction::Maximize;
  fail(ErrorCode::InvalidInput, "direction must be auto, minimize or maximize");
}

json protocol_json(const ProtocolResult& r) {
  return {{"mean_accuracy", r.mean_accuracy},
          {"std_dev", r.std_dev},
          {"repetitions", r.repetitions},
          {"per_class_accuracy", r.per_class_accuracy},
          {"accuracies", r.accuracies}};
}

std::string curve_csv(const json& curve) {
  std::string out = "queries,map\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.3f\n", p.at("queries").get<std::size_t>(), p.at("map").get<double>());
    out += buf;
  }
  return out;
}

}  // namespace

extern "C" {

const char* eraloc_version(void) { return "1.0.0"; }
const char* eraloc_last_error(void) { return last_error.c_str(); }

const char* eraloc_status_name(eraloc_status s) {
  if (s == ERALOC_OK) return "OK";
  if (s == ERALOC_INVALID_OPTIONS) return "INVALID_OPTIONS";
  if (s >= ERALOC_INVALID_INPUT && s <= ERALOC_INTERNAL) return error_code_name(static_cast<ErrorCode>(s));
  return "UNKNOWN";
}

void eraloc_string_free(char* s) { std::free(s); }

// ---- features ----

eraloc_status eraloc_features_load(const char* path, eraloc_features** out) {
  return guarded([&] {
    need_out(out);
    auto h = std::make_unique<eraloc_features>();
    h->f = load_features(cstr(path, "path"), &h->scheme);
    *out = h.release();
  });
}

eraloc_status eraloc_features_save(const eraloc_features* f, const char* path) {
  return guarded([&] { save_features(cstr(path, "path"), need(f, "features").f, f->scheme); });
}

eraloc_status eraloc_features_create(const double* rows, size_t n, size_t dim, const char* const* ids,
                                     const char* const* labels, int target_domain, eraloc_features** out) {
  return guarded([&] {
    need_out(out);
    if (n > 0 && !rows) throw OptionsError("null rows");
    Matrix m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        rows, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    Domain dom = target_domain ? Domain::Target : Domain::Source;
    auto h = std::make_unique<eraloc_features>();
    h->f = make_features(std::move(m), target_domain ? "t" : "s", dom);
    if (ids)
      for (size_t i = 0; i < n; ++i) h->f.ids[i] = cstr(ids[i], "id");
    if (labels) {
      std::vector<std::string> l;
      for (size_t i = 0; i < n; ++i) l.emplace_back(cstr(labels[i], "label"));
      h->f.labels = std::move(l);
    }
    h->f.validate();
    *out = h.release();
  });
}

eraloc_status eraloc_features_merge_distractors(const eraloc_features* relevant, const eraloc_features* distractors,
                                                eraloc_features** out) {
  return guarded([&] {
    need_out(out);
    auto h = std::make_unique<eraloc_features>();
    h->f = merge_distractors(need(relevant, "relevant").f, need(distractors, "distractors").f);
    h->scheme = relevant->scheme;
    *out = h.release();
  });
}

eraloc_status eraloc_features_info(const eraloc_features* f, char** json_out) {
  return guarded([&] {
    const FeatureMatrix& m = need(f, "features").f;
    std::size_t distractors = 0;
    for (Eigen::Index i = 0; i < m.size(); ++i) distractors += m.is_distractor(i);
    emit({{"n", m.size()},
          {"dim", m.dim()},
          {"scheme", scheme_name(f->scheme)},
          {"domain", domain_name(m.domain)},
          {"labeled", m.has_labels()},
          {"distractors", distractors}},
         json_out);
  });
}

void eraloc_features_free(eraloc_features* f) { delete f; }

// ---- models ----

eraloc_status eraloc_model_load(const char* path, eraloc_model** out) {
  return guarded([&] {
    need_out(out);
    *out = new eraloc_model{load_model(cstr(path, "path"))};
  });
}

eraloc_status eraloc_model_save(const eraloc_model* m, const char* path) {
  return guarded([&] { save_model(cstr(path, "path"), need(m, "model").m); });
}

eraloc_status eraloc_model_info(const eraloc_model* m, char** json_out) {
  return guarded([&] {
    const AnyModel& a = need(m, "model").m;
    json j = {{"kind", model_kind_name(kind_of(a))}, {"fingerprint", hex64(model_fingerprint(a))}};
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, Codebook>) {
            j["k"] = x.k();
            j["dim"] = x.dim();
          } else if constexpr (std::is_same_v<T, GmmModel>) {
            j["k"] = x.k();
            j["dim"] = x.dim();
            j["fv_dim"] = 2 * x.k() * x.dim();
          } else if constexpr (std::is_same_v<T, SaModel>) {
            j["ambient"] = x.ambient();
            j["d_source"] = x.source.dim();
            j["d_target"] = x.target.dim();
            j["model_hash"] = hex64(model_hash(x));
          } else if constexpr (std::is_same_v<T, GfkModel>) {
            j["ambient"] = x.g.rows();
            j["d"] = x.d;
            j["model_hash"] = hex64(model_hash(x));
          } else {
            j["ambient"] = x.ambient();
            j["d"] = x.dim();
            j["eigenvalues"] = std::vector<double>(x.eigenvalues.data(), x.eigenvalues.data() + x.eigenvalues.size());
          }
        },
        a);
    emit(j, json_out);
  });
}

void eraloc_model_free(eraloc_model* m) { delete m; }

// ---- pipeline ----

eraloc_status eraloc_train_codebook(const eraloc_features* descriptors, const char* options, eraloc_model** out) {
  return guarded([&] {
    need_out(out);
    json o = parse_options(options);
    KMeansParams p;
    std::string mode = o.value("mode", "exact");
    if (mode == "approximate")
      p.mode = KMeansMode::Approximate;
    else if (mode != "exact")
      fail(ErrorCode::InvalidInput, "mode must be exact or approximate");
    p.seed = o.value("seed", p.seed);
    p.max_iter = o.value("max_iter", p.max_iter);
    p.trees = o.value("trees", p.trees);
    p.checks = o.value("checks", p.checks);
    Matrix x = training_rows(need(descriptors, "descriptors").f, o);
    *out = new eraloc_model{train_codebook(x, o.value("k", 3000), p).codebook};
  });
}

eraloc_status eraloc_train_gmm(const eraloc_features* descriptors, const char* options, eraloc_model** out) {
  return guarded([&] {
    need_out(out);
    json o = parse_options(options);
    GmmParams p;
    p.seed = o.value("seed", p.seed);
    p.max_iter = o.value("max_iter", p.max_iter);
    Matrix x = training_rows(need(descriptors, "descriptors").f, o);
    *out = new eraloc_model{train_gmm(x, o.value("k", 64), p).model};
  });
}

eraloc_status eraloc_encode(const eraloc_features* descriptors, const eraloc_model* model, const char* options,
                            eraloc_features** out) {
  return guarded([&] {
    need_out(out);
    json o = parse_options(options);
    const FeatureMatrix& d = need(descriptors, "descriptors").f;
    const AnyModel& m = need(model, "model").m;
    auto groups = group_descriptors(d);
    std::map<std::string, Eigen::Index> first;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const std::string& id = d.ids[static_cast<std::size_t>(i)];
      first.emplace(id.substr(0, id.rfind('#')), i);
    }
    auto h = std::make_unique<eraloc_features>();
    Matrix rows;
    if (auto* gmm = std::get_if<GmmModel>(&m)) {
      h->scheme = Scheme::FisherVector;
      rows.resize(static_cast<Eigen::Index>(groups.size()), 2 * gmm->k() * gmm->dim());
      for (std::size_t g = 0; g < groups.size(); ++g)
        rows.row(static_cast<Eigen::Index>(g)) = encode_fv(groups[g].second, *gmm).values.transpose();
    } else if (auto* cb = std::get_if<Codebook>(&m)) {
      bool tfidf = o.value("tfidf", false);
      int checks = o.value("checks", 0);
      h->scheme = tfidf ? Scheme::BowTfIdf : Scheme::Bow;
      Matrix counts(static_cast<Eigen::Index>(groups.size()), cb->k());
      std::optional<KdForest> forest;
      if (checks > 0) forest.emplace(cb->centers, 4, o.value("seed", std::uint64_t{0}));
      for (std::size_t g = 0; g < groups.size(); ++g)
        counts.row(static_cast<Eigen::Index>(g)) =
            (forest ? bow_counts(groups[g].second, *cb, *forest, checks) : bow_counts(groups[g].second, *cb)).transpose();
      std::optional<Vector> idf;
      if (tfidf) idf = compute_idf(counts);
      rows.resize(counts.rows(), counts.cols());
      for (Eigen::Index g = 0; g < counts.rows(); ++g)
        rows.row(g) = encode_bow_counts(counts.row(g).transpose(), idf).values.transpose();
    } else {
      fail(ErrorCode::MissingModel, "encoding needs a codebook or a GMM");
    }
    h->f = make_features(std::move(rows), "img", d.domain);
    std::vector<std::string> labels;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      h->f.ids[g] = groups[g].first;
      Eigen::Index src = first.at(groups[g].first);
      if (d.has_labels()) labels.push_back((*d.labels)[static_cast<std::size_t>(src)]);
      if (!d.distractor.empty()) h->f.distractor.push_back(d.distractor[static_cast<std::size_t>(src)]);
    }
    if (d.has_labels()) h->f.labels = std::move(labels);
    *out = h.release();
  });
}

eraloc_status eraloc_fit_subspace(const eraloc_features* data, const char* options, eraloc_model** out) {
  return guarded([&] {
    need_out(out);
    json o = parse_options(options);
    const FeatureMatrix& f = need(data, "features").f;
    if (o.contains("energy")) {
      Subspace full = fit_pca_full(f.rows, std::min(f.size() - 1, f.dim()));
      int d = estimate_dim_eig(full.eigenvalues, o.at("energy")).rounded;
      *out = new eraloc_model{truncate(full, d)};
    } else {
      *out = new eraloc_model{fit_pca(f.rows, o.at("d").get<Eigen::Index>())};
    }
  });
}

eraloc_status eraloc_estimate_dim(const eraloc_features* data, const char* options, char** json_out) {
  return guarded([&] {
    json o = parse_options(options);
    const FeatureMatrix& f = need(data, "features").f;
    DimMethod method = parse_dim_method(o.value("method", "mle"));
    DimEstimate e;
    FractalParams fp;
    fp.seed = o.value("seed", fp.seed);
    switch (method) {
      case DimMethod::Mle:
        e = estimate_dim_mle(f.rows, o.value("k_min", 6), o.value("k_max", 12));
        break;
      case DimMethod::Gmst:
        e = estimate_dim_gmst(f.rows, fp);
        break;
      case DimMethod::Cdm:
        e = estimate_dim_cdm(f.rows, fp);
        break;
      case DimMethod::Eig: {
        Subspace full = fit_pca_full(f.rows, std::min(f.size() - 1, f.dim()));
        e = estimate_dim_eig(full.eigenvalues, o.value("energy", 0.9));
        break;
      }
    }
    emit({{"value", e.value}, {"rounded", e.rounded}, {"method", dim_method_name(e.method)}}, json_out);
  });
}

eraloc_status eraloc_learn_alignment(const eraloc_features* source, const eraloc_features* target, const char* options,
                                     eraloc_model** out) {
  return guarded([&] {
    need_out(out);
    json o = parse_options(options);
    AdaptConfig c;
    c.method = parse_adapt_method(o.value("method", "esa"));
    if (c.method == AdaptMethod::None) fail(ErrorCode::InvalidInput, "method none learns no model");
    c.d_source = o.value("d_source", 0);
    c.d_target = o.value("d_target", 0);
    c.d_max = o.value("d_max", c.d_max);
    c.mle_k_min = o.value("k_min", c.mle_k_min);
    c.mle_k_max = o.value("k_max", c.mle_k_max);
    c.seed = o.value("seed", c.seed);
    AlignmentModel a = learn_alignment(need(source, "source").f, need(target, "target").f, c);
    if (a.sa)
      *out = new eraloc_model{*a.sa};
    else
      *out = new eraloc_model{*a.gfk};
  });
}

eraloc_status eraloc_classify(const eraloc_features* train, const eraloc_features* test, const eraloc_model* model,
                              const char* options, char** json_out) {
  return guarded([&] {
    json o = parse_options(options);
    AlignmentModel a = as_alignment(model);
    Metric metric = metric_for(o, a);
    const FeatureMatrix& te = need(test, "test").f;
    auto preds = nn_classify(need(train, "train").f, te, metric, model ? &a : nullptr, direction_of(o));
    json p = json::array();
    for (const auto& x : preds)
      p.push_back({{"id", x.sample_id}, {"label", x.predicted_label}, {"nearest", x.nearest_source_id}, {"score", x.score}});
    json j = {{"metric", metric_name(metric)}, {"predictions", p}, {"accuracy", nullptr}};
    if (te.has_labels()) {
      std::map<std::string, std::string> truth;
      for (std::size_t i = 0; i < te.ids.size(); ++i) truth[te.ids[i]] = (*te.labels)[i];
      j["accuracy"] = evaluate_accuracy(preds, truth);
    }
    emit(j, json_out);
  });
}

eraloc_status eraloc_evaluate(const eraloc_features* source, const eraloc_features* target, const char* options,
                              char** json_out) {
  return guarded([&] {
    json o = parse_options(options);
    ProtocolOptions p;
    p.samples_per_class = o.value("samples_per_class", p.samples_per_class);
    p.repetitions = o.value("repetitions", p.repetitions);
    p.seed = o.value("seed", p.seed);
    p.adapt.method = parse_adapt_method(o.value("method", "none"));
    p.adapt.d_source = o.value("d_source", 0);
    p.adapt.d_target = o.value("d_target", 0);
    p.adapt.seed = p.seed;
    p.metric = o.contains("metric") ? parse_metric(o.at("metric")) : default_metric(p.adapt.method);
    p.direction = direction_of(o);
    ProtocolResult r = run_protocol(need(source, "source").f, need(target, "target").f, p);
    json j = protocol_json(r);
    j["metric"] = metric_name(p.metric);
    j["method"] = adapt_method_name(p.adapt.method);
    emit(j, json_out);
  });
}

eraloc_status eraloc_simulate_session(const eraloc_features* archive, const eraloc_features* queries,
                                      const char* options, char** json_out) {
  return guarded([&] {
    json o = parse_options(options);
    SimulationConfig c;
    c.schedule_length = o.value("schedule_length", c.schedule_length);
    c.top_k = o.value("top_k", c.top_k);
    c.repetitions = o.value("repetitions", c.repetitions);
    c.seed = o.value("seed", c.seed);
    c.noise = o.value("noise", c.noise);
    c.session.relearn_every = o.value("relearn_every", c.session.relearn_every);
    c.session.min_dim_images = o.value("min_dim_images", c.session.min_dim_images);
    SessionReport r = simulate_session(need(archive, "archive").f, need(queries, "queries").f, c);
    json reps = json::array();
    for (const auto& rr : r.reps)
      reps.push_back({{"before", rr.before},
                      {"after", rr.after},
                      {"baseline", rr.baseline},
                      {"adapted", rr.adapted},
                      {"trigger_queries", rr.trigger_queries},
                      {"d_hat_s", rr.d_hat_s},
                      {"d_hat_t", rr.d_hat_t},
                      {"model_hash", hex64(rr.model_hash)},
                      {"n_s", rr.n_s},
                      {"n_t", rr.n_t}});
    json curve = json::array();
    for (const auto& p : r.mean_curve) curve.push_back({{"queries", p.queries}, {"map", p.map}, {"adapted", p.adapted}});
    emit({{"before_mean", r.before_mean},
          {"before_std", r.before_std},
          {"after_mean", r.after_mean},
          {"after_std", r.after_std},
          {"baseline_mean", r.baseline_mean},
          {"baseline_std", r.baseline_std},
          {"skipped_queries", r.skipped_queries},
          {"reps", reps},
          {"mean_curve", curve}},
         json_out);
  });
}

eraloc_status eraloc_report(const char* results_json, char** text_out) {
  return guarded([&] {
    json in = json::parse(cstr(results_json, "results"));
    std::vector<json> docs = in.is_array() ? in.get<std::vector<json>>() : std::vector<json>{in};
    std::vector<ClassificationRow> cls;
    std::vector<RetrievalRow> ret;
    json curve;
    for (const auto& d : docs) {
      if (d.contains("classification"))
        for (const auto& r : d.at("classification"))
          cls.push_back({r.value("detector", ""), r.value("descriptor", ""), r.value("representation", ""),
                         r.value("classifier", ""), r.at("acc_one_mean"), r.at("acc_one_std"), r.at("acc_all")});
      if (d.contains("retrieval"))
        for (const auto& r : d.at("retrieval")) ret.push_back({r.at("representation"), r.at("map")});
      if (d.contains("curve")) curve = d.at("curve");
      if (d.contains("mean_curve")) {
        std::string tag = d.value("representation", "");
        std::string prefix = tag.empty() ? "" : tag + " ";
        ret.push_back({prefix + "no adaptation", d.at("before_mean")});
        ret.push_back({prefix + "neighbor baseline", d.at("baseline_mean")});
        ret.push_back({prefix + "adapted", d.at("after_mean")});
        curve = d.at("mean_curve");
      }
    }
    json out = json::object();
    if (!cls.empty()) out["classification.csv"] = format_classification_table(cls);
    if (!ret.empty()) out["retrieval.csv"] = format_retrieval_table(ret);
    if (!curve.is_null()) out["curve.csv"] = curve_csv(curve);
    if (out.empty()) fail(ErrorCode::SchemaError, "no classification, retrieval or curve data in the input");
    emit(out, text_out);
  });
}

// ---- index ----

eraloc_status eraloc_index_build(const eraloc_features* archive, eraloc_index** out) {
  return guarded([&] {
    need_out(out);
    *out = new eraloc_index{std::make_shared<const RetrievalIndex>(RetrievalIndex::build(need(archive, "archive").f))};
  });
}

eraloc_status eraloc_index_adapt(const eraloc_index* index, const eraloc_model* sa_model, eraloc_index** out) {
  return guarded([&] {
    need_out(out);
    const auto* sa = std::get_if<SaModel>(&need(sa_model, "model").m);
    if (!sa) fail(ErrorCode::MissingModel, "adapted retrieval needs an SA model");
    auto space = make_adapted_space(*sa, sa->target.eigenvalues);
    *out = new eraloc_index{std::make_shared<const RetrievalIndex>(need(index, "index").index->adapted(space))};
  });
}

eraloc_status eraloc_index_query(const eraloc_index* index, const eraloc_features* queries, const char* options,
                                 char** json_out) {
  return guarded([&] {
    json o = parse_options(options);
    const RetrievalIndex& idx = *need(index, "index").index;
    const FeatureMatrix& q = need(queries, "queries").f;
    std::size_t k = o.value("k", std::size_t{10});
    json all = json::array();
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      json res = json::array();
      auto hits = idx.query(q.rows.row(i).transpose(), k);
      for (std::size_t r = 0; r < hits.size(); ++r)
        res.push_back({{"rank", r + 1}, {"id", hits[r].id}, {"score", hits[r].score}});
      all.push_back({{"query", q.ids[static_cast<std::size_t>(i)]}, {"results", res}});
    }
    emit(all, json_out);
  });
}

eraloc_status eraloc_index_info(const eraloc_index* index, char** json_out) {
  return guarded([&] {
    const RetrievalIndex& idx = *need(index, "index").index;
    bool adapted = idx.mode() == RetrievalIndex::Mode::Adapted;
    emit({{"size", idx.size()},
          {"dim", idx.dim()},
          {"raw_dim", idx.raw_dim()},
          {"mode", adapted ? "adapted" : "raw"},
          {"bytes", adapted ? idx.adapted_bytes() : idx.raw_bytes()}},
         json_out);
  });
}

void eraloc_index_free(eraloc_index* index) { delete index; }

// ---- service ----

eraloc_status eraloc_service_create(const char* options, eraloc_service** out) {
  return guarded([&] {
    need_out(out);
    json o = parse_options(options);
    service::ServiceConfig c;
    c.archive_path = o.value("archive", "");
    c.queries_path = o.value("queries", "");
    c.manifest_path = o.value("manifest", "");
    c.thumb_root = o.value("thumb_root", "");
    c.gmm_path = o.value("gmm", "");
    c.state_dir = o.value("state_dir", "");
    c.session.relearn_every = o.value("relearn_every", c.session.relearn_every);
    c.session.min_dim_images = o.value("min_dim_images", c.session.min_dim_images);
    c.max_k = o.value("max_k", c.max_k);
    auto h = std::make_unique<eraloc_service>();
    h->svc = std::make_unique<service::Service>(c);
    *out = h.release();
  });
}

eraloc_status eraloc_service_start(eraloc_service* s, const char* host, int port, int* bound_port) {
  return guarded([&] {
    int p = need(s, "service").svc->start(host ? host : "127.0.0.1", port);
    if (bound_port) *bound_port = p;
  });
}

eraloc_status eraloc_service_wait(eraloc_service* s) {
  return guarded([&] { need(s, "service").svc->wait(); });
}

eraloc_status eraloc_service_stop(eraloc_service* s) {
  return guarded([&] { need(s, "service").svc->stop(); });
}

void eraloc_service_free(eraloc_service* s) { delete s; }

}  // extern "C"
