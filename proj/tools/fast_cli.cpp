// fast: command-line driver for the entity-graph machine-text detector.
//
// Exit codes: 0 success, 1 data or model error, 2 usage error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fast/fast.hpp"

namespace fs = std::filesystem;
using namespace fast;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::vector<std::size_t> parse_windows(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      std::size_t used = 0;
      const long v = std::stol(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--w", "window sizes must be positive integers, got '" + part + "'");
    }
  }
  if (out.empty()) throw CLI::ValidationError("--w", "at least one window size is required");
  return out;
}

// ---------------------------------------------------------------- profile

struct ProfileArgs {
  std::string human, machine, windows = "1,2", out;
  bool svg = true;
};

int run_profile(const ProfileArgs& a) {
  const auto human = read_corpus(a.human);
  const auto machine = read_corpus(a.machine);
  const auto reports = profile_corpus(human, machine, parse_windows(a.windows));
  ensure_dir(a.out);
  {
    auto out = open_out(a.out + "/ecc_scc.csv");
    write_consistency_csv(reports, out);
  }
  {
    auto out = open_out(a.out + "/kde.csv");
    write_kde_csv(reports, out);
  }
  {
    auto out = open_out(a.out + "/kde_scc.csv");
    write_kde_csv(reports, out, true);
  }
  for (const auto& r : reports) {
    if (a.svg) open_out(a.out + "/kde_w" + std::to_string(r.window) + ".svg") << kde_svg(r);
    std::cout << "w=" << r.window << " mean_ecc human=" << r.mean(Label::Human, true)
              << " machine=" << r.mean(Label::Machine, true) << " mean_scc human=" << r.mean(Label::Human, false)
              << " machine=" << r.mean(Label::Machine, false) << '\n';
  }
  return 0;
}

// ------------------------------------------------------------- dump-graph

struct DumpGraphArgs {
  std::string corpus, id;
  double threshold = 0.5;
};

int run_dump_graph(const DumpGraphArgs& a) {
  for (const auto& doc : read_corpus(a.corpus)) {
    if (doc.id != a.id) continue;
    const auto graph = build_graph(doc, extract_entities(doc), GraphOptions{a.threshold});
    std::cout << graph_to_json(graph).dump(2) << '\n';
    return 0;
  }
  throw Error(a.corpus + ": no document with id '" + a.id + "'");
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
  std::size_t titles = 200;
  std::string out;
  std::uint64_t seed = 7;
  std::size_t min_sentences = 5, max_sentences = 7;
};

int run_synth(const SynthArgs& a) {
  if (a.titles < 3) throw CLI::ValidationError("--titles", "need at least 3 titles (train, valid and test)");
  SynthConfig c;
  c.valid_titles = std::max<std::size_t>(1, a.titles / 8);
  c.test_titles = c.valid_titles;
  c.train_titles = a.titles - 2 * c.valid_titles;
  c.seed = a.seed;
  c.min_sentences = a.min_sentences;
  c.max_sentences = a.max_sentences;
  const auto corpus = generate_synthetic_corpus(c);
  ensure_dir(a.out);
  write_corpus(corpus.train, a.out + "/train.jsonl");
  write_corpus(corpus.valid, a.out + "/valid.jsonl");
  write_corpus(corpus.test, a.out + "/test.jsonl");
  save_vectors(corpus.entities, a.out + "/entities.txt");
  std::cout << "titles train=" << c.train_titles << " valid=" << c.valid_titles << " test=" << c.test_titles << '\n';
  return 0;
}

// -------------------------------------------------------------- nsp-build

struct NspBuildArgs {
  std::string corpus, out;
};

int run_nsp_build(const NspBuildArgs& a) {
  const auto pairs = build_nsp_dataset(read_corpus(a.corpus));
  write_nsp_pairs(pairs, a.out);
  std::cout << "pairs=" << pairs.size() << '\n';
  return 0;
}

// -------------------------------------------------------------- nsp-train

struct NspTrainArgs {
  std::string pairs, out, preset = "paper";
  std::optional<double> lr;
  std::optional<std::size_t> epochs, batch, embed_dim, hidden_dim;
  std::optional<std::uint64_t> seed;
  bool no_interaction = false;
};

int run_nsp_train(const NspTrainArgs& a) {
  NspConfig c = a.preset == "desk" ? NspConfig::desk() : NspConfig{};
  if (a.lr) c.learning_rate = *a.lr;
  if (a.epochs) c.epochs = *a.epochs;
  if (a.batch) c.batch_size = *a.batch;
  if (a.embed_dim) c.embed_dim = *a.embed_dim;
  if (a.hidden_dim) c.hidden_dim = *a.hidden_dim;
  if (a.seed) c.seed = *a.seed;
  if (a.no_interaction) c.interaction = false;
  const auto result = train_nsp(read_nsp_pairs(a.pairs), c);
  save_nsp(result.scorer, a.out);
  std::cout << "epoch,train_loss,heldout_acc\n" << std::setprecision(6);
  for (const auto& l : result.log) std::cout << l.epoch << ',' << l.train_loss << ',' << l.heldout_accuracy << '\n';
  return 0;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::string corpus, valid, config, out, entities, nsp, vectors, preset = "paper";
  std::map<std::string, std::string> overrides;
};

int run_train(const TrainArgs& a) {
  TrainConfig c = a.preset == "desk" ? TrainConfig::desk() : TrainConfig::paper();
  if (!a.config.empty()) apply_config_file(c, a.config);
  for (const auto& [k, v] : a.overrides) {
    try {
      c.set(k, v);
    } catch (const Error& e) {
      throw CLI::ValidationError("--" + k, e.what());
    }
  }
  c.validate();

  const auto train_docs = read_corpus(a.corpus);
  const std::vector<Document> valid_docs = a.valid.empty() ? std::vector<Document>{} : read_corpus(a.valid);
  TrainResources res;
  if (!a.entities.empty()) {
    EntityVecStore store = load_vectors(a.entities);
    for (const auto& w : store.warnings()) std::cerr << "warning: " << w << '\n';
    res.entities = std::move(store);
  }
  if (!a.nsp.empty()) res.nsp = std::make_shared<NspScorer>(load_nsp(a.nsp));
  if (c.model.use_nsp && c.model.use_structure && !res.nsp) {
    throw Error("use_nsp is on but no scorer was given; pass --nsp PATH or set use_nsp = false");
  }
  if (!a.vectors.empty()) res.provider = std::make_shared<PrecomputedProvider>(PrecomputedProvider::load(a.vectors));

  const TrainResult result = train(train_docs, valid_docs, c, res);
  ensure_dir(a.out);
  save_model(result.model, a.out + "/model.json");
  auto metrics = open_out(a.out + "/metrics.csv");
  write_metrics_csv(result.log, metrics);
  std::cout << "best_epoch=" << result.best_epoch << '\n';
  write_metrics_csv(result.log, std::cout);
  return 0;
}

// ---------------------------------------------------------- eval, predict

struct ModelArgs {
  std::string model, corpus, vectors, out;
  bool paired = false;
  std::size_t threads = 1;
};

FastModel load(const ModelArgs& a) {
  std::shared_ptr<const WordProvider> pre;
  if (!a.vectors.empty()) pre = std::make_shared<PrecomputedProvider>(PrecomputedProvider::load(a.vectors));
  return load_model(a.model, pre);
}

int run_eval(const ModelArgs& a) {
  const FastModel model = load(a);
  const auto docs = read_corpus(a.corpus);
  const EvalResult r = a.paired ? evaluate_paired(model, docs, a.threads) : evaluate_unpaired(model, docs, a.threads);
  std::cout << std::setprecision(6) << "documents=" << r.total << '\n'
            << "unpaired_accuracy=" << r.unpaired_accuracy() << " (" << r.correct << '/' << r.total << ")\n";
  if (auto p = r.paired_accuracy()) {
    std::cout << "paired_accuracy=" << *p << " (" << r.pairs_correct << '/' << r.pairs_total << ")\n";
  }
  const Confusion& c = r.confusion;
  std::cout << "confusion human->human=" << c.human_as_human << " human->machine=" << c.human_as_machine
            << " machine->human=" << c.machine_as_human << " machine->machine=" << c.machine_as_machine << '\n';
  return 0;
}

int run_predict(const ModelArgs& a) {
  const FastModel model = load(a);
  const auto docs = read_corpus(a.corpus);
  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  for (const auto& p : predict_all(model, docs, a.threads)) {
    nlohmann::json rec = {{"id", p.doc_id}, {"p_machine", p.p_machine}, {"label", to_string(p.predicted)}};
    out << rec.dump() << '\n';
  }
  return 0;
}

// -------------------------------------------------------------- gradcheck

struct GradCheckArgs {
  std::uint64_t seed = 1;
  std::size_t docs = 20;
  double tol = 1e-4;
};

int run_gradcheck(const GradCheckArgs& a) {
  Rng rng(a.seed);
  Real worst = 0.0;
  std::string worst_param;
  bool ok = true;
  for (std::size_t i = 0; i < a.docs; ++i) {
    const Document doc = random_toy_document(rng, "toy-" + std::to_string(i));
    const ModelGradCheck r = model_grad_check(doc, a.seed * 7919 + i, a.tol);
    ok = ok && r.result.passed;
    if (r.result.worst_rel_error >= worst) {
      worst = r.result.worst_rel_error;
      worst_param = r.result.worst_param;
    }
  }
  std::cout << "documents=" << a.docs << " worst_relative_error=" << std::setprecision(6) << worst << " ("
            << worst_param << ") tol=" << a.tol << ' ' << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fast: detect machine-generated text from its entity structure"};
  app.set_version_flag("--version", std::string("fast ") + kVersion);
  app.require_subcommand(1);

  ProfileArgs pa;
  auto* profile = app.add_subcommand("profile", "ECC/SCC counts and KDE curves for a human and a machine corpus");
  profile->add_option("--human", pa.human, "human corpus (JSONL)")->required();
  profile->add_option("--machine", pa.machine, "machine corpus (JSONL)")->required();
  profile->add_option("--w", pa.windows, "comma-separated window sizes")->capture_default_str();
  profile->add_option("--out", pa.out, "output directory")->required();
  profile->add_flag("--svg,!--no-svg", pa.svg, "write kde_w{N}.svg plots")->capture_default_str();

  DumpGraphArgs da;
  auto* dump = app.add_subcommand("dump-graph", "print the entity graph of one document as JSON");
  dump->add_option("--corpus", da.corpus, "corpus (JSONL)")->required();
  dump->add_option("--id", da.id, "document id")->required();
  dump->add_option("--threshold", da.threshold, "inter-sentence edge similarity threshold")->capture_default_str();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate the paired synthetic corpus and its entity vectors");
  synth->add_option("--titles", sa.titles, "title pairs in total; 1/8 each go to valid and test")
      ->capture_default_str();
  synth->add_option("--out", sa.out, "output directory")->required();
  synth->add_option("--seed", sa.seed, "random seed")->capture_default_str();
  synth->add_option("--min-sentences", sa.min_sentences, "fewest sentences per document")->capture_default_str();
  synth->add_option("--max-sentences", sa.max_sentences, "most sentences per document")->capture_default_str();

  NspBuildArgs nba;
  auto* nsp_build = app.add_subcommand("nsp-build", "build next-sentence pairs from a corpus");
  nsp_build->add_option("--corpus", nba.corpus, "corpus (JSONL)")->required();
  nsp_build->add_option("--out", nba.out, "pair file to write (JSONL)")->required();

  NspTrainArgs nta;
  auto* nsp_train = app.add_subcommand("nsp-train", "train the next-sentence scorer");
  nsp_train->add_option("--pairs", nta.pairs, "pair file from nsp-build")->required();
  nsp_train->add_option("--out", nta.out, "scorer checkpoint to write")->required();
  nsp_train->add_option("--preset", nta.preset, "paper or desk")
      ->check(CLI::IsMember({"paper", "desk"}))
      ->capture_default_str();
  nsp_train->add_option("--learning_rate", nta.lr, "learning rate");
  nsp_train->add_option("--epochs", nta.epochs, "epochs");
  nsp_train->add_option("--batch_size", nta.batch, "batch size");
  nsp_train->add_option("--embed_dim", nta.embed_dim, "word embedding width");
  nsp_train->add_option("--hidden_dim", nta.hidden_dim, "hidden layer width");
  nsp_train->add_option("--seed", nta.seed, "random seed");
  nsp_train->add_flag("--no-interaction", nta.no_interaction, "drop the product term from the pair encoding");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train the detector");
  train_cmd->add_option("--corpus", ta.corpus, "training corpus (JSONL)")->required();
  train_cmd->add_option("--valid", ta.valid, "validation corpus (JSONL)");
  train_cmd->add_option("--config", ta.config, "key = value config file; flags override it");
  train_cmd->add_option("--out", ta.out, "output directory for model.json and metrics.csv")->required();
  train_cmd->add_option("--entities", ta.entities, "entity vectors (word2vec text format)");
  train_cmd->add_option("--nsp", ta.nsp, "next-sentence scorer checkpoint");
  train_cmd->add_option("--vectors", ta.vectors, "precomputed per-token vectors (JSONL) instead of trained embeddings");
  train_cmd->add_option("--preset", ta.preset, "paper or desk defaults, applied before the config file")
      ->check(CLI::IsMember({"paper", "desk"}))
      ->capture_default_str();
  std::map<std::string, std::string> raw_overrides;
  for (const auto& key : TrainConfig::keys()) {
    train_cmd->add_option_function<std::string>(
        "--" + key, [&raw_overrides, key](const std::string& v) { raw_overrides[key] = v; }, "config key " + key);
  }

  ModelArgs ea;
  auto* eval = app.add_subcommand("eval", "unpaired (and with --paired, paired) accuracy of a model on a corpus");
  eval->add_option("--model", ea.model, "model.json")->required();
  eval->add_option("--corpus", ea.corpus, "labeled corpus (JSONL)")->required();
  eval->add_flag("--paired", ea.paired, "also report paired accuracy over meta.title groups");
  eval->add_option("--vectors", ea.vectors, "precomputed per-token vectors, for models trained with them");
  eval->add_option("--threads", ea.threads, "worker threads")->capture_default_str();

  ModelArgs pra;
  auto* predict = app.add_subcommand("predict", "write {id, p_machine, label} per document");
  predict->add_option("--model", pra.model, "model.json")->required();
  predict->add_option("--corpus", pra.corpus, "corpus (JSONL)")->required();
  predict->add_option("--out", pra.out, "output JSONL (stdout when omitted)");
  predict->add_option("--vectors", pra.vectors, "precomputed per-token vectors, for models trained with them");
  predict->add_option("--threads", pra.threads, "worker threads")->capture_default_str();

  GradCheckArgs ga;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full model on random toy documents");
  gradcheck->add_option("--seed", ga.seed, "random seed")->capture_default_str();
  gradcheck->add_option("--docs", ga.docs, "number of toy documents")->capture_default_str();
  gradcheck->add_option("--tol", ga.tol, "relative error tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*profile) return run_profile(pa);
    if (*dump) return run_dump_graph(da);
    if (*synth) return run_synth(sa);
    if (*nsp_build) return run_nsp_build(nba);
    if (*nsp_train) return run_nsp_train(nta);
    if (*train_cmd) {
      ta.overrides = raw_overrides;
      return run_train(ta);
    }
    if (*eval) return run_eval(ea);
    if (*predict) return run_predict(pra);
    if (*gradcheck) return run_gradcheck(ga);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
