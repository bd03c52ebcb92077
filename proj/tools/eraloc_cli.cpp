// Command-line front end. Talks to the library only through eraloc.h.

#include "eraloc/eraloc.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <pthread.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
  eraloc_status status;
  std::string message;
};

void check(eraloc_status s) {
  if (s != ERALOC_OK) throw Failure{s, eraloc_last_error()};
}

struct FeaturesDeleter {
  void operator()(eraloc_features* f) const { eraloc_features_free(f); }
};
struct ModelDeleter {
  void operator()(eraloc_model* m) const { eraloc_model_free(m); }
};
struct IndexDeleter {
  void operator()(eraloc_index* i) const { eraloc_index_free(i); }
};
using Features = std::unique_ptr<eraloc_features, FeaturesDeleter>;
using Model = std::unique_ptr<eraloc_model, ModelDeleter>;
using Index = std::unique_ptr<eraloc_index, IndexDeleter>;

Features load_features(const std::string& path) {
  eraloc_features* f = nullptr;
  check(eraloc_features_load(path.c_str(), &f));
  return Features(f);
}

Model load_model(const std::string& path) {
  eraloc_model* m = nullptr;
  check(eraloc_model_load(path.c_str(), &m));
  return Model(m);
}

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out(s);
  eraloc_string_free(s);
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Failure{ERALOC_IO_ERROR, "cannot write " + p.string()};
}

struct Common {
  std::string out;
};

// Options shared by every subcommand.
void add_out(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "run directory for outputs and resolved_config.toml")->required();
  sub->configurable();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eraloc: cross-era place recognition and retrieval"};
  app.set_config("--config", "", "re-run from a resolved_config.toml");
  app.require_subcommand(1);
  Common common;

  // encode
  std::string enc_desc, enc_model;
  bool enc_tfidf = false;
  int enc_checks = 0;
  std::uint64_t enc_seed = 0;
  auto* encode = app.add_subcommand("encode", "encode per-image descriptors as BOW or Fisher vectors");
  encode->add_option("--descriptors", enc_desc, "descriptor store, rows named <image>#<i>")->required();
  encode->add_option("--model", enc_model, "codebook (BOW) or GMM (FV) model")->required();
  encode->add_flag("--tfidf", enc_tfidf, "tf-idf weighting for BOW");
  encode->add_option("--checks", enc_checks, "approximate assignment leaf checks (0 = exact)")->capture_default_str();
  encode->add_option("--seed", enc_seed, "kd-forest seed")->capture_default_str();
  add_out(encode, common);

  // train-codebook
  std::string cb_desc, cb_mode = "exact";
  int cb_k = 3000, cb_iter = 100, cb_trees = 4, cb_checks = 64;
  std::size_t cb_sample = 0;
  std::uint64_t cb_seed = 0;
  auto* train_cb = app.add_subcommand("train-codebook", "k-means visual vocabulary");
  train_cb->add_option("--descriptors", cb_desc)->required();
  train_cb->add_option("--k", cb_k)->capture_default_str();
  train_cb->add_option("--mode", cb_mode)->check(CLI::IsMember({"exact", "approximate"}))->capture_default_str();
  train_cb->add_option("--max-iter", cb_iter)->capture_default_str();
  train_cb->add_option("--trees", cb_trees)->capture_default_str();
  train_cb->add_option("--checks", cb_checks)->capture_default_str();
  train_cb->add_option("--sample", cb_sample, "train on this many sampled descriptors (0 = all)")->capture_default_str();
  train_cb->add_option("--seed", cb_seed)->capture_default_str();
  add_out(train_cb, common);

  // train-gmm
  std::string gmm_desc;
  int gmm_k = 64, gmm_iter = 200;
  std::size_t gmm_sample = 0;
  std::uint64_t gmm_seed = 0;
  auto* train_gmm = app.add_subcommand("train-gmm", "diagonal GMM for Fisher vectors");
  train_gmm->add_option("--descriptors", gmm_desc)->required();
  train_gmm->add_option("--k", gmm_k)->capture_default_str();
  train_gmm->add_option("--max-iter", gmm_iter)->capture_default_str();
  train_gmm->add_option("--sample", gmm_sample)->capture_default_str();
  train_gmm->add_option("--seed", gmm_seed)->capture_default_str();
  add_out(train_gmm, common);

  // fit-subspace
  std::string fs_features;
  int fs_d = 0;
  double fs_energy = 0.0;
  auto* fit_sub = app.add_subcommand("fit-subspace", "PCA subspace of a feature store");
  fit_sub->add_option("--features", fs_features)->required();
  fit_sub->add_option("--d", fs_d, "dimension (0 = use --energy)")->capture_default_str();
  fit_sub->add_option("--energy", fs_energy, "retained eigenvalue energy in (0, 1]")->capture_default_str();
  add_out(fit_sub, common);

  // estimate-dim
  std::string ed_features, ed_method = "mle";
  int ed_kmin = 6, ed_kmax = 12;
  double ed_energy = 0.9;
  std::uint64_t ed_seed = 0;
  auto* est = app.add_subcommand("estimate-dim", "intrinsic dimensionality");
  est->add_option("--features", ed_features)->required();
  est->add_option("--method", ed_method)->check(CLI::IsMember({"mle", "gmst", "cdm", "eig"}))->capture_default_str();
  est->add_option("--k-min", ed_kmin)->capture_default_str();
  est->add_option("--k-max", ed_kmax)->capture_default_str();
  est->add_option("--energy", ed_energy)->capture_default_str();
  est->add_option("--seed", ed_seed)->capture_default_str();
  add_out(est, common);

  // adapt
  std::string ad_source, ad_target, ad_method = "esa";
  int ad_ds = 0, ad_dt = 0, ad_dmax = 256;
  std::uint64_t ad_seed = 0;
  auto* adapt = app.add_subcommand("adapt", "learn a domain alignment");
  adapt->add_option("--source", ad_source)->required();
  adapt->add_option("--target", ad_target)->required();
  adapt->add_option("--method", ad_method)->check(CLI::IsMember({"sa", "esa", "gfk"}))->capture_default_str();
  adapt->add_option("--d-source", ad_ds, "0 selects automatically")->capture_default_str();
  adapt->add_option("--d-target", ad_dt, "0 selects automatically")->capture_default_str();
  adapt->add_option("--d-max", ad_dmax)->capture_default_str();
  adapt->add_option("--seed", ad_seed)->capture_default_str();
  add_out(adapt, common);

  // classify
  std::string cl_train, cl_test, cl_model, cl_metric, cl_dir = "auto";
  auto* classify = app.add_subcommand("classify", "nearest-neighbor location labels");
  classify->add_option("--train", cl_train)->required();
  classify->add_option("--test", cl_test)->required();
  classify->add_option("--model", cl_model, "alignment model (omit for euclidean)");
  classify->add_option("--metric", cl_metric)->check(CLI::IsMember({"euclidean", "sa_sim", "esa_dist", "gfk_sim"}));
  classify->add_option("--direction", cl_dir)->check(CLI::IsMember({"auto", "minimize", "maximize"}))->capture_default_str();
  add_out(classify, common);

  // eval
  std::string ev_source, ev_target, ev_method = "none", ev_metric, ev_dir = "auto";
  std::string ev_detector, ev_descriptor, ev_repr;
  int ev_reps = 100, ev_ds = 0, ev_dt = 0;
  std::uint64_t ev_seed = 0;
  auto* eval = app.add_subcommand("eval", "one-sample and all-sample classification protocol");
  eval->add_option("--source", ev_source)->required();
  eval->add_option("--target", ev_target)->required();
  eval->add_option("--method", ev_method)->check(CLI::IsMember({"none", "sa", "esa", "gfk"}))->capture_default_str();
  eval->add_option("--metric", ev_metric)->check(CLI::IsMember({"euclidean", "sa_sim", "esa_dist", "gfk_sim"}));
  eval->add_option("--direction", ev_dir)->check(CLI::IsMember({"auto", "minimize", "maximize"}))->capture_default_str();
  eval->add_option("--repetitions", ev_reps)->capture_default_str();
  eval->add_option("--d-source", ev_ds)->capture_default_str();
  eval->add_option("--d-target", ev_dt)->capture_default_str();
  eval->add_option("--seed", ev_seed)->capture_default_str();
  eval->add_option("--detector", ev_detector, "table tag")->capture_default_str();
  eval->add_option("--descriptor", ev_descriptor, "table tag")->capture_default_str();
  eval->add_option("--representation", ev_repr, "table tag")->capture_default_str();
  add_out(eval, common);

  // index
  std::string ix_archive, ix_distractors, ix_model;
  auto* index = app.add_subcommand("index", "build the archive index (optionally merged with distractors)");
  index->add_option("--archive", ix_archive)->required();
  index->add_option("--distractors", ix_distractors);
  index->add_option("--model", ix_model, "SA model for adapted mode");
  add_out(index, common);

  // retrieve
  std::string rt_archive, rt_queries, rt_model;
  std::size_t rt_k = 10;
  auto* retrieve = app.add_subcommand("retrieve", "top-k archive images per query");
  retrieve->add_option("--archive", rt_archive)->required();
  retrieve->add_option("--queries", rt_queries)->required();
  retrieve->add_option("--model", rt_model, "SA model for adapted mode");
  retrieve->add_option("--k", rt_k)->capture_default_str();
  add_out(retrieve, common);

  // simulate-session
  std::string sm_archive, sm_queries, sm_distractors;
  std::size_t sm_schedule = 60, sm_topk = 50;
  int sm_reps = 10, sm_relearn = 0, sm_min_dim = 15;
  double sm_noise = 0.0;
  std::uint64_t sm_seed = 0;
  auto* simulate = app.add_subcommand("simulate-session", "interactive session with a simulated user");
  simulate->add_option("--archive", sm_archive)->required();
  simulate->add_option("--queries", sm_queries)->required();
  simulate->add_option("--distractors", sm_distractors);
  simulate->add_option("--schedule", sm_schedule)->capture_default_str();
  simulate->add_option("--top-k", sm_topk)->capture_default_str();
  simulate->add_option("--repetitions", sm_reps)->capture_default_str();
  simulate->add_option("--seed", sm_seed)->capture_default_str();
  simulate->add_option("--noise", sm_noise)->capture_default_str();
  simulate->add_option("--relearn-every", sm_relearn, "0 = learn once")->capture_default_str();
  simulate->add_option("--min-dim-images", sm_min_dim)->capture_default_str();
  add_out(simulate, common);

  // serve
  std::string sv_archive, sv_queries, sv_manifest, sv_gmm, sv_state, sv_host = "127.0.0.1";
  int sv_port = 8080, sv_relearn = 0, sv_min_dim = 15;
  auto* serve = app.add_subcommand("serve", "HTTP service for interactive sessions");
  serve->add_option("--archive", sv_archive)->required();
  serve->add_option("--queries", sv_queries);
  serve->add_option("--manifest", sv_manifest);
  serve->add_option("--gmm", sv_gmm, "GMM for descriptor uploads");
  serve->add_option("--state-dir", sv_state, "event logs; sessions are replayed on start");
  serve->add_option("--host", sv_host)->capture_default_str();
  serve->add_option("--port", sv_port)->capture_default_str();
  serve->add_option("--relearn-every", sv_relearn)->capture_default_str();
  serve->add_option("--min-dim-images", sv_min_dim)->capture_default_str();
  add_out(serve, common);

  // report
  std::vector<std::string> rp_inputs;
  auto* report = app.add_subcommand("report", "result tables and curve data from eval/simulate outputs");
  report->add_option("--input", rp_inputs, "result JSON files")->required();
  add_out(report, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    fs::path out(common.out);
    fs::create_directories(out);
    // Only the invoked subcommand, every option with its effective value.
    CLI::App* sub = app.get_subcommands().front();
    // Unset optional strings come out as key="" which would not parse back for
    // options with a fixed choice set, so they are left out.
    std::istringstream lines(sub->config_to_str(true, false));
    std::string resolved = "[" + sub->get_name() + "]\n";
    for (std::string line; std::getline(lines, line);)
      if (!line.ends_with("=\"\"")) resolved += line + "\n";
    write_text(out / "resolved_config.toml", resolved);

    if (*encode) {
      auto d = load_features(enc_desc);
      auto m = load_model(enc_model);
      json o = {{"tfidf", enc_tfidf}, {"checks", enc_checks}, {"seed", enc_seed}};
      eraloc_features* f = nullptr;
      check(eraloc_encode(d.get(), m.get(), o.dump().c_str(), &f));
      Features enc(f);
      check(eraloc_features_save(enc.get(), (out / "features.erfs").c_str()));
      char* info = nullptr;
      check(eraloc_features_info(enc.get(), &info));
      write_text(out / "features.json", take(info));
    } else if (*train_cb || *train_gmm) {
      bool cb = train_cb->parsed();
      auto d = load_features(cb ? cb_desc : gmm_desc);
      eraloc_model* m = nullptr;
      if (cb) {
        json o = {{"k", cb_k}, {"mode", cb_mode}, {"max_iter", cb_iter}, {"trees", cb_trees},
                  {"checks", cb_checks}, {"sample", cb_sample}, {"seed", cb_seed}};
        check(eraloc_train_codebook(d.get(), o.dump().c_str(), &m));
      } else {
        json o = {{"k", gmm_k}, {"max_iter", gmm_iter}, {"sample", gmm_sample}, {"seed", gmm_seed}};
        check(eraloc_train_gmm(d.get(), o.dump().c_str(), &m));
      }
      Model model(m);
      std::string name = cb ? "codebook" : "gmm";
      check(eraloc_model_save(model.get(), (out / (name + ".erlm")).c_str()));
      char* info = nullptr;
      check(eraloc_model_info(model.get(), &info));
      write_text(out / (name + ".json"), take(info));
    } else if (*fit_sub) {
      auto d = load_features(fs_features);
      json o = fs_d > 0 ? json{{"d", fs_d}} : json{{"energy", fs_energy > 0 ? fs_energy : 0.9}};
      eraloc_model* m = nullptr;
      check(eraloc_fit_subspace(d.get(), o.dump().c_str(), &m));
      Model model(m);
      check(eraloc_model_save(model.get(), (out / "subspace.erlm").c_str()));
      char* info = nullptr;
      check(eraloc_model_info(model.get(), &info));
      write_text(out / "subspace.json", take(info));
    } else if (*est) {
      auto d = load_features(ed_features);
      json o = {{"method", ed_method}, {"k_min", ed_kmin}, {"k_max", ed_kmax}, {"energy", ed_energy}, {"seed", ed_seed}};
      char* r = nullptr;
      check(eraloc_estimate_dim(d.get(), o.dump().c_str(), &r));
      std::string text = take(r);
      write_text(out / "dimension.json", text);
      std::cout << json::parse(text).at("value").get<double>() << "\n";
    } else if (*adapt) {
      auto s = load_features(ad_source), t = load_features(ad_target);
      json o = {{"method", ad_method}, {"d_source", ad_ds}, {"d_target", ad_dt}, {"d_max", ad_dmax}, {"seed", ad_seed}};
      eraloc_model* m = nullptr;
      check(eraloc_learn_alignment(s.get(), t.get(), o.dump().c_str(), &m));
      Model model(m);
      check(eraloc_model_save(model.get(), (out / "alignment.erlm").c_str()));
      char* info = nullptr;
      check(eraloc_model_info(model.get(), &info));
      write_text(out / "alignment.json", take(info));
    } else if (*classify) {
      auto tr = load_features(cl_train), te = load_features(cl_test);
      Model model = cl_model.empty() ? Model() : load_model(cl_model);
      json o = {{"direction", cl_dir}};
      if (!cl_metric.empty()) o["metric"] = cl_metric;
      char* r = nullptr;
      check(eraloc_classify(tr.get(), te.get(), model.get(), o.dump().c_str(), &r));
      std::string text = take(r);
      write_text(out / "predictions.json", text);
      json j = json::parse(text);
      if (!j.at("accuracy").is_null()) std::cout << "accuracy " << j.at("accuracy").get<double>() << "\n";
    } else if (*eval) {
      auto s = load_features(ev_source), t = load_features(ev_target);
      json o = {{"method", ev_method}, {"direction", ev_dir}, {"repetitions", ev_reps},
                {"d_source", ev_ds}, {"d_target", ev_dt}, {"seed", ev_seed}};
      if (!ev_metric.empty()) o["metric"] = ev_metric;
      char* r = nullptr;
      o["samples_per_class"] = 1;
      check(eraloc_evaluate(s.get(), t.get(), o.dump().c_str(), &r));
      json one = json::parse(take(r));
      o["samples_per_class"] = 0;
      check(eraloc_evaluate(s.get(), t.get(), o.dump().c_str(), &r));
      json all = json::parse(take(r));
      std::string classifier = ev_method == "none" ? "NN" : ev_method;
      for (auto& ch : classifier) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      json row = {{"detector", ev_detector}, {"descriptor", ev_descriptor}, {"representation", ev_repr},
                  {"classifier", classifier}, {"acc_one_mean", one.at("mean_accuracy")},
                  {"acc_one_std", one.at("std_dev")}, {"acc_all", all.at("mean_accuracy")}};
      write_text(out / "eval.json", json{{"one", one}, {"all", all}, {"classification", {row}}}.dump(2) + "\n");
      std::cout << "acc_one " << one.at("mean_accuracy").get<double>() << " +- " << one.at("std_dev").get<double>()
                << "  acc_all " << all.at("mean_accuracy").get<double>() << "\n";
    } else if (*index || *retrieve) {
      bool ix = index->parsed();
      auto a = load_features(ix ? ix_archive : rt_archive);
      if (ix && !ix_distractors.empty()) {
        auto d = load_features(ix_distractors);
        eraloc_features* merged = nullptr;
        check(eraloc_features_merge_distractors(a.get(), d.get(), &merged));
        a.reset(merged);
      }
      eraloc_index* raw = nullptr;
      check(eraloc_index_build(a.get(), &raw));
      Index idx(raw);
      const std::string& model_path = ix ? ix_model : rt_model;
      if (!model_path.empty()) {
        auto m = load_model(model_path);
        eraloc_index* ad = nullptr;
        check(eraloc_index_adapt(idx.get(), m.get(), &ad));
        idx.reset(ad);
      }
      char* info = nullptr;
      check(eraloc_index_info(idx.get(), &info));
      write_text(out / "index.json", take(info));
      if (ix) {
        check(eraloc_features_save(a.get(), (out / "archive.erfs").c_str()));
      } else {
        auto q = load_features(rt_queries);
        char* r = nullptr;
        check(eraloc_index_query(idx.get(), q.get(), json{{"k", rt_k}}.dump().c_str(), &r));
        write_text(out / "results.json", take(r));
      }
    } else if (*simulate) {
      auto a = load_features(sm_archive), q = load_features(sm_queries);
      if (!sm_distractors.empty()) {
        auto d = load_features(sm_distractors);
        eraloc_features* merged = nullptr;
        check(eraloc_features_merge_distractors(a.get(), d.get(), &merged));
        a.reset(merged);
      }
      json o = {{"schedule_length", sm_schedule}, {"top_k", sm_topk}, {"repetitions", sm_reps}, {"seed", sm_seed},
                {"noise", sm_noise}, {"relearn_every", sm_relearn}, {"min_dim_images", sm_min_dim}};
      char* r = nullptr;
      check(eraloc_simulate_session(a.get(), q.get(), o.dump().c_str(), &r));
      std::string text = take(r);
      write_text(out / "session_report.json", text);
      char* files = nullptr;
      check(eraloc_report(text.c_str(), &files));
      json f = json::parse(take(files));
      write_text(out / "curve.csv", f.at("curve.csv").get<std::string>());
      json j = json::parse(text);
      std::printf("before %.3f +- %.3f  after %.3f +- %.3f  baseline %.3f +- %.3f\n", j["before_mean"].get<double>(),
                  j["before_std"].get<double>(), j["after_mean"].get<double>(), j["after_std"].get<double>(),
                  j["baseline_mean"].get<double>(), j["baseline_std"].get<double>());
    } else if (*serve) {
      json o = {{"archive", sv_archive}, {"queries", sv_queries}, {"manifest", sv_manifest}, {"gmm", sv_gmm},
                {"state_dir", sv_state}, {"relearn_every", sv_relearn}, {"min_dim_images", sv_min_dim}};
      // Handle SIGINT/SIGTERM synchronously; server threads inherit the mask.
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      eraloc_service* svc = nullptr;
      check(eraloc_service_create(o.dump().c_str(), &svc));
      std::unique_ptr<eraloc_service, void (*)(eraloc_service*)> guard(svc, eraloc_service_free);
      int port = 0;
      check(eraloc_service_start(svc, sv_host.c_str(), sv_port, &port));
      std::cout << "listening on http://" << sv_host << ":" << port << std::endl;
      int sig = 0;
      sigwait(&set, &sig);
      check(eraloc_service_stop(svc));
    } else if (*report) {
      json docs = json::array();
      for (const auto& p : rp_inputs) {
        std::ifstream in(p);
        if (!in) throw Failure{ERALOC_IO_ERROR, "cannot read " + p};
        try {
          docs.push_back(json::parse(in));
        } catch (const json::exception& e) {
          throw Failure{ERALOC_SCHEMA_ERROR, p + ": " + e.what()};
        }
      }
      char* files = nullptr;
      check(eraloc_report(docs.dump().c_str(), &files));
      json tables = json::parse(take(files));
      for (const auto& [name, text] : tables.items()) write_text(out / name, text.get<std::string>());
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << eraloc_status_name(f.status) << ": " << f.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
