// pmc: command-line entry points for every pipeline stage and the studio HTTP service.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "pmc/service.hpp"

namespace fs = std::filesystem;
using namespace pmc;

namespace {

void print_json_line(const json& j) { std::cout << j.dump() << "\n"; }

std::vector<pipeline::LoadedSequence> load_data(const fs::path& dir, const std::string& split, Manifest* out = nullptr) {
  const auto manifest = load_manifest(dir / "manifest.json");
  auto seqs = pipeline::load_split(manifest, split);
  require(!seqs.empty(), ErrorKind::EmptyDataset, "no '" + split + "' sequences in " + dir.string());
  if (out != nullptr) *out = manifest;
  return seqs;
}

// --- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  fs::path out;
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;
  std::optional<int> sequences_per_concept;
};

void gen_data(const GenDataArgs& a) {
  DatasetConfig cfg = a.config.empty() ? DatasetConfig{} : dataset_config_from_json(read_json_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.noise) cfg.noise_std = *a.noise;
  if (a.sequences_per_concept) cfg.sequences_per_concept = *a.sequences_per_concept;
  const auto ds = generate_dataset(cfg);
  write_dataset(ds, a.out);
  print_json_line({{"dataset", a.out.string()},
                   {"sequences", ds.items.size()},
                   {"train", ds.split("train").size()},
                   {"test", ds.split("test").size()},
                   {"vocabulary", ds.vocabulary.labels}});
}

// --- fit ----------------------------------------------------------------------

struct FitArgs {
  fs::path input;
  fs::path out;
  double lambda = SegmentationConfig{}.lambda;
  int min_frames = SegmentationConfig{}.min_segment_frames;
};

void fit(const FitArgs& a) {
  const auto poses = load_pose_sequence(a.input);
  SegmentationConfig seg{a.lambda, a.min_frames, 0};
  if (seg.lambda < 0.0) seg = pipeline::resolve_segmentation({{poses.id, "", poses, {}, {}}}, seg);
  validate(seg);
  const auto r = pipeline::fit_sequence(poses, seg);
  if (!a.out.empty()) save_primitives(r.primitives, a.out);
  std::cout << std::setprecision(6) << "KD " << r.kd << "% primitives " << r.primitives.size() << " lambda "
            << seg.lambda << " time " << r.seconds << "s\n";
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  fs::path data;
  fs::path out;
  fs::path history;
  int epochs = TrainingConfig{}.epochs;
  int hidden = ModelConfig{}.hidden_dim;
  double lambda = -1.0;
  std::uint64_t seed = 0;
};

json train_request_json(const TrainArgs& a, const ConceptVocabulary& vocab) {
  return {{"epochs", a.epochs}, {"hidden_dim", a.hidden}, {"lambda", a.lambda}, {"seed", a.seed},
          {"vocabulary", vocab.labels}};
}

void train_cmd(const TrainArgs& a) {
  Manifest manifest;
  const auto seqs = load_data(a.data, "train", &manifest);
  const auto req = service::train_request_from_json(train_request_json(a, manifest.vocabulary));
  TrainingHistory history;
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = pipeline::train_recognizer(*req.vocabulary, seqs, req.train, &history);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_checkpoint(model, a.out);
  if (!a.history.empty()) {
    json h = json::array();
    for (const auto& e : history.epochs)
      h.push_back({{"epoch", e.epoch},
                   {"ctc", e.loss.ctc},
                   {"primitive", e.loss.primitive},
                   {"transition", e.loss.transition},
                   {"total", e.loss.total}});
    write_json_file(a.history, h);
  }
  std::cerr << "trained " << history.epochs.size() << " epochs in " << secs << "s\n";
  print_json_line({{"checkpoint", a.out.string()},
                   {"lambda", model.segmentation.lambda},
                   {"final_loss", history.epochs.empty() ? 0.0 : history.epochs.back().loss.total}});
}

// --- describe -----------------------------------------------------------------

struct DescribeArgs {
  fs::path model;
  fs::path input;
  int beam = DescribeConfig{}.beam_width;
};

void describe_cmd(const DescribeArgs& a) {
  const auto model = load_checkpoint(a.model);
  const auto poses = load_pose_sequence(a.input);
  json out = to_json(describe(poses, model, {a.beam}).description);
  out["sequence_id"] = poses.id;
  print_json_line(out);
}

// --- extract ------------------------------------------------------------------

struct ExtractArgs {
  fs::path model;
  fs::path data;
  fs::path out;
  fs::path occurrences;
  double cov_f = kDefaultCovF;
  double threshold = kDefaultSimilarityThreshold;
};

void extract_cmd(const ExtractArgs& a) {
  const auto model = load_checkpoint(a.model);
  const auto seqs = load_data(a.data, "train");
  const auto ex = pipeline::extract_concept_models(model, seqs, {a.cov_f, a.threshold});
  pipeline::save_concept_models(ex.models, a.out);
  if (!a.occurrences.empty()) {
    json occ = json::object();
    for (const auto& [label, list] : ex.occurrences) {
      json arr = json::array();
      for (const auto& o : list) arr.push_back(to_json(o));
      occ[label] = arr;
    }
    write_json_file(a.occurrences, occ);
  }
  for (const auto& [label, r] : ex.reports)
    print_json_line({{"concept", label},
                     {"extracted", r.extracted},
                     {"after_length", r.after_length},
                     {"after_similarity", r.after_similarity},
                     {"similarity_applied", r.similarity_applied},
                     {"l_star", ex.models.at(label).l_star}});
}

// --- synth --------------------------------------------------------------------

struct SynthArgs {
  fs::path concepts;
  fs::path script;
  fs::path out;
  fs::path primitives;
  fs::path skeleton;
  std::optional<std::uint64_t> seed;
};

void synth_cmd(const SynthArgs& a) {
  const auto models = pipeline::load_concept_models(a.concepts);
  require(!models.empty(), ErrorKind::EmptyDataset, "no concept models in " + a.concepts.string());
  auto script = motion_script_from_json(read_json_file(a.script));
  if (a.seed) script.seed = *a.seed;
  const PoseSequence meta = a.skeleton.empty() ? synth_skeleton() : load_pose_sequence(a.skeleton).empty_like();
  const auto s = synthesize(script, models, meta, a.script.stem().string());
  save_pose_sequence(s.poses, a.out);
  if (!a.primitives.empty()) save_primitives(s.primitives, a.primitives);
  print_json_line({{"poses", a.out.string()},
                   {"frames", s.poses.num_frames()},
                   {"segments", s.segments.size()},
                   {"max_junction_gap", max_junction_gap(s.primitives)}});
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  fs::path data;
  fs::path model;
  fs::path concepts;
  fs::path out;
  int runs = GenMetricsConfig{}.runs;
  int samples = GenMetricsConfig{}.samples;
  std::uint64_t seed = 0;
};

void eval_cmd(const EvalArgs& a) {
  Manifest manifest;
  const auto test = load_data(a.data, "test", &manifest);
  MetricsReport report;
  if (!a.model.empty()) {
    const auto model = load_checkpoint(a.model, &manifest.vocabulary);
    const auto d = pipeline::evaluate_description(model, test);
    report.norm_ed = d.norm_ed;
    report.seq_acc = d.seq_acc;
    report.rep_map = d.rep_map;
    double kd = 0.0;
    for (const auto& s : test) kd += pipeline::fit_sequence(s.poses, model.segmentation).kd;
    report.kd = kd / static_cast<double>(test.size());
  }
  if (!a.concepts.empty()) {
    const auto models = pipeline::load_concept_models(a.concepts);
    require(!models.empty(), ErrorKind::EmptyDataset, "no concept models in " + a.concepts.string());
    const auto [ape_v, ave_v] = pipeline::pose_errors(models, test, a.seed);
    report.ape = ape_v;
    report.ave = ave_v;
    GenMetricsConfig g;
    g.runs = a.runs;
    g.samples = a.samples;
    g.seed = a.seed;
    ClassifierConfig c;
    c.seed = a.seed;
    const auto gen = pipeline::evaluate_generation(models, manifest.vocabulary, test, c, g);
    for (std::size_t i = 0; i < gen.metrics.runs.size(); ++i) {
      json line = to_json(gen.metrics.runs[i]);
      line["run"] = i;
      print_json_line(line);
    }
    report.fid = gen.metrics.mean.fid;
    report.acc = gen.metrics.mean.acc;
    report.div = gen.metrics.mean.div;
    report.mm = gen.metrics.mean.mm;
  }
  const json j = to_json(report);
  if (!a.out.empty()) write_json_file(a.out, j);
  print_json_line(j);
}

// --- serve --------------------------------------------------------------------

httplib::Server* g_server = nullptr;

void serve_cmd(int port, fs::path project_dir, const std::string& host) {
  if (const char* env = std::getenv("PMC_PROJECT"); env != nullptr && *env != '\0') project_dir = env;
  require(!project_dir.empty(), ErrorKind::ValidationError, "serve needs --project DIR or PMC_PROJECT");
  service::Project project(project_dir);
  httplib::Server server;
  service::install_routes(server, project);
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
  } else if (!server.bind_to_port(host, port)) {
    fail(ErrorKind::ValidationError, "cannot bind " + host + ":" + std::to_string(port));
  }
  print_json_line({{"listening", bound}, {"project", fs::absolute(project_dir).string()}});
  std::cout.flush();
  server.listen_after_bind();
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << service::error_json(kind, message).dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical programmatic motion concepts"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* c_gen = app.add_subcommand("gen-data", "Write a synthetic benchmark dataset");
  c_gen->add_option("--out,-o", gd.out, "Output directory")->required();
  c_gen->add_option("--config", gd.config, "Dataset config JSON");
  c_gen->add_option("--seed", gd.seed);
  c_gen->add_option("--noise", gd.noise, "Keypoint noise std (px) for every concept");
  c_gen->add_option("--sequences-per-concept", gd.sequences_per_concept);

  FitArgs fa;
  auto* c_fit = app.add_subcommand("fit", "Segment a pose sequence into spline primitives");
  c_fit->add_option("input", fa.input, "Pose sequence JSON")->required();
  c_fit->add_option("--out,-o", fa.out, "Primitive file to write");
  c_fit->add_option("--lambda", fa.lambda, "Per-segment penalty (negative: calibrate)");
  c_fit->add_option("--min-frames", fa.min_frames);

  TrainArgs ta;
  auto* c_train = app.add_subcommand("train", "Train the concept recognizer on a dataset's train split");
  c_train->add_option("--data", ta.data, "Dataset directory with manifest.json")->required();
  c_train->add_option("--out,-o", ta.out, "Checkpoint to write")->required();
  c_train->add_option("--history", ta.history, "Per-epoch loss history JSON");
  c_train->add_option("--epochs", ta.epochs);
  c_train->add_option("--hidden", ta.hidden);
  c_train->add_option("--lambda", ta.lambda, "Per-segment penalty (negative: calibrate)");
  c_train->add_option("--seed", ta.seed);

  DescribeArgs da;
  auto* c_desc = app.add_subcommand("describe", "Print the Description of a pose sequence");
  c_desc->add_option("--model", da.model, "Checkpoint")->required();
  c_desc->add_option("input", da.input, "Pose sequence JSON")->required();
  c_desc->add_option("--beam", da.beam);

  ExtractArgs ea;
  auto* c_ext = app.add_subcommand("extract", "Extract occurrences and fit concept models");
  c_ext->add_option("--model", ea.model, "Checkpoint")->required();
  c_ext->add_option("--data", ea.data, "Dataset directory")->required();
  c_ext->add_option("--out,-o", ea.out, "Concept model directory")->required();
  c_ext->add_option("--occurrences", ea.occurrences, "Write the extracted occurrences here");
  c_ext->add_option("--cov-f", ea.cov_f);
  c_ext->add_option("--threshold", ea.threshold, "Similarity threshold (px)");

  SynthArgs sa;
  auto* c_synth = app.add_subcommand("synth", "Synthesize a pose sequence from a motion script");
  c_synth->add_option("--concepts", sa.concepts, "Concept model directory")->required();
  c_synth->add_option("script", sa.script, "Script JSON")->required();
  c_synth->add_option("--out,-o", sa.out, "Pose sequence to write")->required();
  c_synth->add_option("--primitives", sa.primitives, "Also write the stitched primitives");
  c_synth->add_option("--skeleton", sa.skeleton, "Pose file supplying joint names and frame size");
  c_synth->add_option("--seed", sa.seed, "Override the script seed");

  EvalArgs va;
  auto* c_eval = app.add_subcommand("eval", "Evaluate on a dataset's test split");
  c_eval->add_option("--data", va.data, "Dataset directory")->required();
  c_eval->add_option("--model", va.model, "Checkpoint (description metrics)");
  c_eval->add_option("--concepts", va.concepts, "Concept model directory (generation metrics)");
  c_eval->add_option("--out,-o", va.out, "Write the MetricsReport here");
  c_eval->add_option("--runs", va.runs);
  c_eval->add_option("--samples", va.samples);
  c_eval->add_option("--seed", va.seed);

  int port = 8080;
  fs::path project;
  std::string host = "127.0.0.1";
  auto* c_serve = app.add_subcommand("serve", "Serve the studio HTTP API over a project directory");
  c_serve->add_option("--port", port, "0 picks a free port");
  c_serve->add_option("--project", project, "Project directory (PMC_PROJECT overrides)");
  c_serve->add_option("--host", host);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", e.what(), 2);
  }

  try {
    if (c_gen->parsed()) gen_data(gd);
    else if (c_fit->parsed()) fit(fa);
    else if (c_train->parsed()) train_cmd(ta);
    else if (c_desc->parsed()) describe_cmd(da);
    else if (c_ext->parsed()) extract_cmd(ea);
    else if (c_synth->parsed()) synth_cmd(sa);
    else if (c_eval->parsed()) eval_cmd(va);
    else if (c_serve->parsed()) serve_cmd(port, project, host);
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), 1);
  }
  return 0;
}
