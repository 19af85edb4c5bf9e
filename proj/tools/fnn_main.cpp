// fnn — command-line front end for the layered Green's-function toolkit.
//
// Subcommands:
//   gen chern | gen mnist | gen fk   write sample containers (.fnnd)
//   train                            train a model from a JSON config
//   eval                             score a checkpoint on a container
//   sweep kappa | sweep melt         parameter sweeps to TSV
//   diagnose                         entanglement/spectral report for a sample
//
// All outputs are written atomically (temp file + rename). Every stochastic
// path takes an explicit seed: reruns are byte-identical.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fnn/datasets.hpp"
#include "fnn/dmft.hpp"
#include "fnn/greens.hpp"
#include "fnn/interpret.hpp"
#include "fnn/model.hpp"
#include "fnn/training.hpp"

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// small IO helpers

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw fnn::format_error("cannot open " + tmp + " for writing");
    os << content;
    if (!os) throw fnn::format_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw fnn::format_error("cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw fnn::format_error(path + ": " + e.what());
  }
  return j;
}

double number_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

// ---------------------------------------------------------------------------
// config parsing

fnn::IntraConnectivity parse_intra(const std::string& s) {
  if (s == "none") return fnn::IntraConnectivity::none;
  if (s == "nearest") return fnn::IntraConnectivity::nearest;
  if (s == "next_nearest") return fnn::IntraConnectivity::next_nearest;
  if (s == "full") return fnn::IntraConnectivity::full;
  throw fnn::format_error("unknown intra connectivity: " + s);
}

fnn::InterConnectivity parse_inter(const std::string& s) {
  if (s == "full") return fnn::InterConnectivity::full;
  if (s == "tree") return fnn::InterConnectivity::tree;
  if (s == "overlapping") return fnn::InterConnectivity::overlapping;
  throw fnn::format_error("unknown inter connectivity: " + s);
}

fnn::LayerGeometry parse_geometry(const json& j) {
  if (!j.is_array() || j.size() != 2)
    throw fnn::format_error("geometry entries must be [width, height]");
  return {j[0].get<Eigen::Index>(), j[1].get<Eigen::Index>()};
}

fnn::ArchitectureSpec parse_architecture(const json& arch) {
  fnn::ArchitectureSpec spec;
  spec.input_size = arch.at("input_size").get<Eigen::Index>();
  for (const json& m : arch.at("layers")) spec.layer_sizes.push_back(m.get<Eigen::Index>());
  const std::size_t depth = spec.layer_sizes.size();

  auto fill = [&](const char* key, auto parse, auto& out, auto fallback) {
    using Value = decltype(fallback);
    std::vector<Value> values;
    if (!arch.contains(key)) {
      values.assign(depth, fallback);
    } else if (arch.at(key).is_string()) {
      values.assign(depth, parse(arch.at(key).get<std::string>()));
    } else {
      for (const json& e : arch.at(key)) values.push_back(parse(e.get<std::string>()));
      if (values.size() != depth)
        throw fnn::format_error(std::string(key) + " must list one entry per layer");
    }
    out = std::move(values);
  };
  fill("intra", parse_intra, spec.intra_connectivity, fnn::IntraConnectivity::full);
  fill("inter", parse_inter, spec.inter_connectivity, fnn::InterConnectivity::full);

  if (arch.contains("input_geometry")) spec.input_geometry = parse_geometry(arch.at("input_geometry"));
  if (arch.contains("geometry")) {
    for (const json& g : arch.at("geometry")) spec.layer_geometry.push_back(parse_geometry(g));
    if (spec.layer_geometry.size() != depth)
      throw fnn::format_error("geometry must list one [w, h] per layer");
  }
  return spec;
}

fnn::TrainConfig parse_train_config(const json& cfg) {
  fnn::TrainConfig tc;
  const std::string head = cfg.value("head", std::string("ldos"));
  if (head == "ldos") tc.head = fnn::Head::ldos;
  else if (head == "cc") tc.head = fnn::Head::cc;
  else throw fnn::format_error("unknown head: " + head);

  const std::string loss = cfg.value("loss", std::string("cross_entropy"));
  if (loss == "cross_entropy") tc.loss = fnn::Loss::cross_entropy;
  else if (loss == "mean_square") tc.loss = fnn::Loss::mean_square;
  else throw fnn::format_error("unknown loss: " + loss);

  tc.energy = number_or(cfg, "energy", 0.0);
  tc.broadening = number_or(cfg, "broadening", 0.005);
  tc.learning_rate = number_or(cfg, "learning_rate", 0.005);
  tc.weight_decay = number_or(cfg, "weight_decay", 0.0);
  tc.batch_size = static_cast<int>(number_or(cfg, "batch_size", 32));
  tc.epochs = static_cast<int>(number_or(cfg, "epochs", 10));
  if (!cfg.contains("seed")) throw fnn::format_error("config requires an explicit \"seed\"");
  tc.seed = cfg.at("seed").get<std::uint64_t>();
  tc.stop_at_full_train_accuracy = cfg.value("stop_at_full_train_accuracy", false);
  tc.record_mi_trace = cfg.value("record_mi_trace", false);
  tc.mi_probe_count = static_cast<int>(number_or(cfg, "mi_probe_count", 8));
  return tc;
}

// ---------------------------------------------------------------------------
// container <-> samples

// Stored matrices become encodings according to the config's "encoding":
//   onsite_dense     square Hermitian sample matrices (chern containers)
//   onsite_diagonal  1×P rows, Ĥ_0 = scale·diag(row)   (mnist containers)
//   external         1×P rows as surface intensities     (mnist containers)
std::vector<fnn::TrainSample> load_train_samples(const std::string& path, const json& cfg) {
  const fnn::LoadedContainer box = fnn::load_container(path);
  const std::string encoding = cfg.value("encoding", std::string("onsite_dense"));
  const double scale = number_or(cfg, "scale", 1.0);

  std::vector<fnn::TrainSample> samples;
  samples.reserve(box.samples.size());
  for (const fnn::StoredSample& s : box.samples) {
    const json meta = json::parse(s.metadata_json);
    fnn::TrainSample out;
    out.label = meta.at("label").get<int>();
    if (encoding == "onsite_dense") {
      out.input = fnn::InputEncoding::onsite_dense(s.matrix);
    } else {
      if (s.matrix.rows() != 1)
        throw fnn::format_error(path + ": diagonal/external encodings need 1×P rows");
      const fnn::VecR row = s.matrix.row(0).real().transpose();
      out.input = encoding == "onsite_diagonal"
                      ? fnn::InputEncoding::onsite_diagonal(scale * row)
                      : fnn::InputEncoding::external(row);
    }
    samples.push_back(std::move(out));
  }
  return samples;
}

std::vector<fnn::FkSample> load_fk_samples(const std::string& path) {
  const fnn::LoadedContainer box = fnn::load_container(path);
  std::vector<fnn::FkSample> samples;
  samples.reserve(box.samples.size());
  for (const fnn::StoredSample& s : box.samples) {
    const json meta = json::parse(s.metadata_json);
    fnn::FkSample fk;
    fk.label = meta.at("label").get<int>();
    fk.instance.lx = meta.at("lx").get<Eigen::Index>();
    fk.instance.ly = meta.at("ly").get<Eigen::Index>();
    fk.instance.u = meta.at("u").get<double>();
    fk.instance.temperature = meta.at("temperature").get<double>();
    fk.instance.fkmit = meta.value("fkmit", false);
    fk.instance.mu = meta.value("mu", 0.0);
    fk.instance.ef = meta.value("ef", 0.0);
    fk.instance.t = meta.value("t", 1.0);
    fk.instance.tp = meta.value("tp", 0.0);
    samples.push_back(std::move(fk));
  }
  return samples;
}

// ---------------------------------------------------------------------------
// shared evaluation (used by `eval`; training does its own bookkeeping)

struct EvalReport {
  double loss = 0.0, accuracy = 0.0;
  double auroc = std::numeric_limits<double>::quiet_NaN();
  int count = 0;
};

EvalReport evaluate_samples(const fnn::FnnParameters& params,
                            const std::vector<fnn::TrainSample>& samples,
                            const fnn::TrainConfig& cfg) {
  if (samples.empty()) throw fnn::shape_error("no samples to evaluate");
  const Eigen::Index n_classes =
      cfg.head == fnn::Head::cc ? 2 : params.spec.layer_sizes.back();
  EvalReport report;
  report.count = static_cast<int>(samples.size());
  std::vector<double> scores;
  std::vector<int> labels;
  for (const fnn::TrainSample& s : samples) {
    const fnn::VecR y = fnn::model_scores(params, s.input, cfg);
    int predicted = 0;
    if (cfg.head == fnn::Head::cc) {
      const double sv = y[0];  // logistic score
      predicted = sv > 0.5 ? 1 : 0;
      const double raw = params.cc_scale * sv / (1.0 - sv);
      report.loss += fnn::cc_loss(raw, s.label, params.cc_scale, cfg.loss).first;
      scores.push_back(sv);
    } else {
      y.maxCoeff(&predicted);
      // model_scores returns the raw per-class outputs for the LDOS head
      fnn::VecR raw = y;
      report.loss += fnn::ldos_loss(raw, s.label, cfg.loss, n_classes).first;
      if (n_classes == 2) scores.push_back(y[1] - y[0]);
    }
    labels.push_back(s.label);
    report.accuracy += predicted == s.label ? 1.0 : 0.0;
  }
  report.loss /= report.count;
  report.accuracy /= report.count;
  if (!scores.empty()) report.auroc = fnn::auroc(scores, labels);
  return report;
}

std::string history_to_jsonl(const std::vector<fnn::EpochMetrics>& history) {
  std::string text;
  for (const fnn::EpochMetrics& m : history) text += fnn::metrics_to_jsonl(m) + "\n";
  return text;
}

json summary_json(const std::vector<fnn::EpochMetrics>& history, int best_epoch) {
  const fnn::EpochMetrics& last = history.back();
  json j{{"epochs", history.size()},
         {"best_epoch", best_epoch},
         {"train_loss", last.train_loss},
         {"train_accuracy", last.train_accuracy}};
  if (!std::isnan(last.test_accuracy)) {
    j["test_loss"] = last.test_loss;
    j["test_accuracy"] = last.test_accuracy;
  }
  if (!std::isnan(last.test_auroc)) j["test_auroc"] = last.test_auroc;
  return j;
}

// ---------------------------------------------------------------------------
// gen

void run_gen_chern(const std::string& out, int count, std::uint64_t seed,
                   const fnn::ChernDatasetConfig& cfg) {
  const std::vector<fnn::ChernSample> set = fnn::generate_chern_dataset(count, seed, cfg);
  json manifest{{"kind", "chern"},
                {"count", count},
                {"seed", seed},
                {"lattice", cfg.lattice_size},
                {"sweep_kappa", cfg.sweep_kappa},
                {"kappa", cfg.kappa}};
  std::vector<fnn::StoredSample> stored;
  stored.reserve(set.size());
  for (const fnn::ChernSample& s : set) {
    json meta{{"label", s.label}, {"kappa", s.kappa},  {"w0", s.w0},
              {"w1", s.w1},       {"w2", s.w2},        {"marker", s.marker.c},
              {"gap", s.marker.gap}};
    stored.push_back({meta.dump(), s.h});
  }
  fnn::save_container(out, manifest.dump(), stored);
  std::cout << json{{"written", out}, {"samples", stored.size()}}.dump() << "\n";
}

void run_gen_mnist(const std::string& dir, const std::string& out, bool train, bool pool,
                   int limit) {
  std::vector<fnn::ImageSample> images = fnn::load_mnist_dir(dir, train);
  if (limit > 0 && static_cast<int>(images.size()) > limit) images.resize(limit);
  std::vector<fnn::StoredSample> stored;
  stored.reserve(images.size());
  int pixels = 0;
  for (fnn::ImageSample& img : images) {
    if (pool) img = fnn::downsample_2x2(img);
    pixels = img.width * img.height;
    json meta{{"label", img.label}, {"width", img.width}, {"height", img.height}};
    fnn::MatC row(1, img.pixels.size());
    row.row(0) = img.pixels.transpose().cast<fnn::cxd>();
    stored.push_back({meta.dump(), std::move(row)});
  }
  json manifest{{"kind", "mnist"}, {"split", train ? "train" : "test"},
                {"pooled", pool},  {"pixels", pixels},
                {"count", stored.size()}};
  fnn::save_container(out, manifest.dump(), stored);
  std::cout << json{{"written", out}, {"samples", stored.size()}}.dump() << "\n";
}

void run_gen_fk(const std::string& out, Eigen::Index lattice, double u,
                const std::vector<double>& temps1, const std::vector<double>& temps0) {
  std::vector<fnn::StoredSample> stored;
  auto push = [&](double temperature, int label) {
    fnn::FkInstance inst;
    inst.lx = lattice;
    inst.ly = lattice;
    inst.u = u;
    inst.fkmit = true;
    inst.temperature = temperature;
    const fnn::FkModel model = fnn::fk_build(inst);
    json meta{{"label", label}, {"temperature", temperature}, {"u", u},
              {"lx", lattice},  {"ly", lattice},              {"fkmit", true}};
    stored.push_back({meta.dump(), model.h});
  };
  for (double t : temps1) push(t, 1);
  for (double t : temps0) push(t, 0);
  json manifest{{"kind", "fk"}, {"u", u}, {"lattice", lattice}, {"count", stored.size()}};
  fnn::save_container(out, manifest.dump(), stored);
  std::cout << json{{"written", out}, {"samples", stored.size()}}.dump() << "\n";
}

// ---------------------------------------------------------------------------
// train / eval

void run_train(const std::string& config_path, const std::string& model_out,
               const std::string& metrics_out, bool save_best) {
  const json cfg = read_json_file(config_path);
  fnn::ArchitectureSpec spec = parse_architecture(cfg.at("architecture"));
  if (!cfg.contains("init_seed"))
    throw fnn::format_error("config requires an explicit \"init_seed\"");
  fnn::FnnParameters params = cfg.contains("resume")
                                  ? fnn::load_checkpoint(cfg.at("resume").get<std::string>())
                                  : fnn::init_parameters(spec, cfg.at("init_seed").get<std::uint64_t>());
  if (cfg.contains("cc_scale")) params.cc_scale = cfg.at("cc_scale").get<double>();

  std::vector<fnn::EpochMetrics> history;
  int best_epoch = 0;
  fnn::FnnParameters chosen;

  if (cfg.contains("interacting")) {
    const json& ij = cfg.at("interacting");
    fnn::InteractingTrainConfig itc;
    itc.base = parse_train_config(cfg);
    itc.grid.temperature = number_or(ij, "temperature", 0.1);
    itc.grid.n0 = static_cast<int>(number_or(ij, "n0", 64));
    itc.dmft.mixing = number_or(ij, "mixing", 0.5);
    itc.dmft.tolerance = number_or(ij, "tolerance", 1e-6);
    itc.dmft.max_iterations = static_cast<int>(number_or(ij, "max_iterations", 500));
    itc.readout_sites = static_cast<int>(number_or(ij, "readout_sites", 0));

    const std::vector<fnn::FkSample> train_set =
        load_fk_samples(cfg.at("train_data").get<std::string>());
    std::vector<fnn::FkSample> test_set;
    if (cfg.contains("test_data")) test_set = load_fk_samples(cfg.at("test_data").get<std::string>());

    fnn::InteractingTrainResult r = fnn::train_interacting(params, train_set, test_set, itc);
    history = std::move(r.history);
    best_epoch = r.best_epoch;
    chosen = save_best ? std::move(r.best) : std::move(r.final);
    if (r.skipped_samples > 0)
      std::cerr << "warning: " << r.skipped_samples << " sample solves did not converge\n";
  } else {
    const fnn::TrainConfig tc = parse_train_config(cfg);
    const std::vector<fnn::TrainSample> train_set =
        load_train_samples(cfg.at("train_data").get<std::string>(), cfg);
    std::vector<fnn::TrainSample> test_set;
    if (cfg.contains("test_data"))
      test_set = load_train_samples(cfg.at("test_data").get<std::string>(), cfg);

    fnn::TrainResult r = fnn::train(std::move(params), train_set, test_set, tc);
    history = std::move(r.history);
    best_epoch = r.best_epoch;
    chosen = save_best ? std::move(r.best) : std::move(r.final);
  }

  if (!metrics_out.empty()) write_text_atomic(metrics_out, history_to_jsonl(history));
  if (!model_out.empty()) fnn::save_checkpoint(chosen, model_out);
  std::cout << summary_json(history, best_epoch).dump() << "\n";
}

void run_eval(const std::string& model_path, const std::string& data_path,
              const std::string& config_path) {
  const json cfg = read_json_file(config_path);
  const fnn::FnnParameters params = fnn::load_checkpoint(model_path);
  const fnn::TrainConfig tc = parse_train_config(cfg);
  const std::vector<fnn::TrainSample> samples = load_train_samples(data_path, cfg);
  const EvalReport r = evaluate_samples(params, samples, tc);
  json j{{"samples", r.count}, {"loss", r.loss}, {"accuracy", r.accuracy}};
  if (!std::isnan(r.auroc)) j["auroc"] = r.auroc;
  std::cout << j.dump() << "\n";
}

// ---------------------------------------------------------------------------
// sweeps

void run_sweep_kappa(const std::string& out, Eigen::Index lattice, double from, double to,
                     int steps, const std::string& model_path, const std::string& config_path) {
  std::optional<fnn::FnnParameters> params;
  fnn::TrainConfig tc;
  json cfg;
  if (!model_path.empty()) {
    params = fnn::load_checkpoint(model_path);
    cfg = read_json_file(config_path);
    tc = parse_train_config(cfg);
  }
  std::ostringstream tsv;
  tsv << "kappa\tmarker\tgap\tscore\n";
  for (int k = 0; k < steps; ++k) {
    const double kappa = steps == 1 ? from : from + (to - from) * k / (steps - 1);
    const fnn::MatC h = fnn::chern_hamiltonian(kappa, lattice);
    const fnn::ChernMarker marker = fnn::kubo_chern(h, lattice);
    double score = std::numeric_limits<double>::quiet_NaN();
    if (params) {
      const fnn::VecR y = fnn::model_scores(*params, fnn::InputEncoding::onsite_dense(h), tc);
      score = tc.head == fnn::Head::cc ? y[0] : y[y.size() - 1] - y[0];
    }
    tsv << kappa << "\t" << marker.c << "\t" << marker.gap << "\t" << score << "\n";
  }
  write_text_atomic(out, tsv.str());
  std::cout << json{{"written", out}, {"rows", steps}}.dump() << "\n";
}

void run_sweep_melt(const std::string& out, Eigen::Index lattice, double u,
                    const std::vector<double>& temps, int n0) {
  fnn::FkInstance inst;
  inst.lx = lattice;
  inst.ly = lattice;
  inst.u = u;
  inst.fkmit = true;
  const fnn::FkModel model = fnn::fk_build(inst);
  std::vector<Eigen::Index> sites(model.h.rows());
  std::iota(sites.begin(), sites.end(), 0);
  fnn::DmftConfig dc;
  dc.lx = lattice;
  dc.ly = lattice;

  std::ostringstream tsv;
  tsv << "temperature\tcheckerboard\tstripe_x\tstripe_y\titerations\tconverged\n";
  for (double t : temps) {
    const fnn::DmftResult r =
        fnn::dmft_solve(model.h, sites, model.u, model.mu, fnn::MatsubaraGrid{t, n0}, dc);
    tsv << t << "\t" << r.checkerboard_op << "\t" << r.stripe_x_op << "\t" << r.stripe_y_op
        << "\t" << r.iterations << "\t" << (r.converged ? 1 : 0) << "\n";
  }
  write_text_atomic(out, tsv.str());
  std::cout << json{{"written", out}, {"rows", temps.size()}}.dump() << "\n";
}

// ---------------------------------------------------------------------------
// diagnose

void run_diagnose(const std::string& model_path, const std::string& data_path,
                  const std::string& config_path, int sample_index, const std::string& out) {
  const json cfg = read_json_file(config_path);
  const fnn::FnnParameters params = fnn::load_checkpoint(model_path);
  const fnn::TrainConfig tc = parse_train_config(cfg);
  const std::vector<fnn::TrainSample> samples = load_train_samples(data_path, cfg);
  if (sample_index < 0 || sample_index >= static_cast<int>(samples.size()))
    throw fnn::shape_error("sample index out of range");
  const fnn::TrainSample& sample = samples[sample_index];

  const fnn::LayeredSystem sys = fnn::assemble(params, sample.input);
  const fnn::MatC h = fnn::full_hamiltonian(sys);
  const fnn::SiteLayout layout = fnn::layout_of(sys);
  const fnn::IngapProbe probe = fnn::spectral_ingap_probe(h);

  json report{{"sample", sample_index}, {"label", sample.label}};
  report["ingap"] = {{"min_abs", probe.min_abs},
                     {"lowest", probe.eigenvalues[0]},
                     {"highest", probe.eigenvalues[probe.eigenvalues.size() - 1]}};

  const fnn::MatC c = fnn::ground_state_correlation(h, tc.energy);
  report["input_output_mi"] = fnn::input_output_mi(params, sample.input, tc.energy);

  std::vector<Eigen::Index> input_sites, output_sites;
  for (Eigen::Index i = layout.offsets[0]; i < layout.offsets[1]; ++i) input_sites.push_back(i);
  const Eigen::Index last = layout.layers() - 1;
  for (Eigen::Index i = layout.offsets[last]; i < layout.offsets[last + 1]; ++i)
    output_sites.push_back(i);
  auto block_entropy = [&](const std::vector<Eigen::Index>& idx) {
    fnn::MatC sub(idx.size(), idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) sub(i, j) = c(idx[i], idx[j]);
    return fnn::entanglement_entropy(sub);
  };
  report["entropy"] = {{"input", block_entropy(input_sites)},
                       {"output", block_entropy(output_sites)}};

  // logic flow: per hidden layer, how many rotated neurons still correlate
  // with the output (rows of C'_{l,out} above threshold)
  const fnn::LogicFlow flow = fnn::logic_flow_transform(c, layout);
  const Eigen::Index out_off = layout.offsets[last];
  const Eigen::Index out_size = layout.layer_size(last);
  json active = json::array();
  for (Eigen::Index l = 1; l < last; ++l) {
    const Eigen::Index m = layout.layer_size(l);
    int rows = 0;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (flow.c_prime.block(layout.offsets[l] + r, out_off, 1, out_size).cwiseAbs().maxCoeff() >
          1e-9)
        ++rows;
    }
    active.push_back(rows);
  }
  report["logic_flow_active_rows"] = active;

  const std::string text = report.dump(2) + "\n";
  if (!out.empty()) write_text_atomic(out, text);
  std::cout << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layered Green's-function models: datasets, training, diagnostics"};
  app.require_subcommand(1);

  // ---- gen ----
  CLI::App* gen = app.add_subcommand("gen", "write sample containers");
  gen->require_subcommand(1);

  CLI::App* gc = gen->add_subcommand("chern", "disordered two-band lattice samples");
  std::string gc_out;
  int gc_count = 0;
  std::uint64_t gc_seed = 0;
  fnn::ChernDatasetConfig gc_cfg;
  gc->add_option("--out", gc_out, "output container")->required();
  gc->add_option("--count", gc_count, "sample count")->required();
  gc->add_option("--seed", gc_seed, "generation seed")->required();
  gc->add_option("--lattice", gc_cfg.lattice_size, "lattice side (even)");
  // default protocol: kappa ~ U[0,1] per sample; a fixed --kappa disables it
  gc_cfg.sweep_kappa = true;
  CLI::Option* gc_kappa = gc->add_option("--kappa", gc_cfg.kappa, "fix the topology parameter");
  gc->add_option("--w0-min", gc_cfg.w0_min, "onsite disorder lower bound");
  gc->add_option("--w0-max", gc_cfg.w0_max, "onsite disorder upper bound");
  gc->add_option("--w1-max", gc_cfg.w1_max, "bond disorder upper bound");
  gc->add_option("--w2-max", gc_cfg.w2_max, "diagonal-bond disorder upper bound");
  gc->add_option("--gap-min", gc_cfg.gap_min, "reject samples with a smaller gap");

  CLI::App* gm = gen->add_subcommand("mnist", "pack MNIST IDX files");
  std::string gm_dir = "data/mnist", gm_out;
  bool gm_test = false, gm_pool = false;
  int gm_limit = 0;
  gm->add_option("--in", gm_dir, "directory with the four IDX files");
  gm->add_option("--out", gm_out, "output container")->required();
  gm->add_flag("--test", gm_test, "pack the test split (default: train)");
  gm->add_flag("--pool", gm_pool, "2x2 average-pool to 14x14");
  gm->add_option("--limit", gm_limit, "keep only the first N images (0 = all)");

  CLI::App* gf = gen->add_subcommand("fk", "interacting lattice instances by temperature");
  std::string gf_out;
  Eigen::Index gf_lattice = 4;
  double gf_u = 4.0;
  std::vector<double> gf_t1, gf_t0;
  gf->add_option("--out", gf_out, "output container")->required();
  gf->add_option("--lattice", gf_lattice, "lattice side");
  gf->add_option("--u", gf_u, "interaction strength");
  gf->add_option("--class1-temps", gf_t1, "temperatures labeled 1")->required()->delimiter(',');
  gf->add_option("--class0-temps", gf_t0, "temperatures labeled 0")->required()->delimiter(',');

  // ---- train ----
  CLI::App* tr = app.add_subcommand("train", "train a model from a JSON config");
  std::string tr_config, tr_model, tr_metrics;
  bool tr_best = false;
  tr->add_option("--config", tr_config, "JSON config")->required();
  tr->add_option("--out", tr_model, "checkpoint path");
  tr->add_option("--metrics", tr_metrics, "JSONL metrics path");
  tr->add_flag("--best", tr_best, "save the best-epoch parameters instead of the final ones");

  // ---- eval ----
  CLI::App* ev = app.add_subcommand("eval", "score a checkpoint on a container");
  std::string ev_model, ev_data, ev_config;
  ev->add_option("--model", ev_model, "checkpoint")->required();
  ev->add_option("--data", ev_data, "sample container")->required();
  ev->add_option("--config", ev_config, "JSON config (head, encoding, energy)")->required();

  // ---- sweep ----
  CLI::App* sw = app.add_subcommand("sweep", "parameter sweeps (TSV)");
  sw->require_subcommand(1);

  CLI::App* sk = sw->add_subcommand("kappa", "clean-lattice marker (and model score) vs kappa");
  std::string sk_out, sk_model, sk_config;
  Eigen::Index sk_lattice = 8;
  double sk_from = 0.0, sk_to = 1.0;
  int sk_steps = 21;
  sk->add_option("--out", sk_out, "TSV path")->required();
  sk->add_option("--lattice", sk_lattice, "lattice side (even)");
  sk->add_option("--from", sk_from, "first kappa");
  sk->add_option("--to", sk_to, "last kappa");
  sk->add_option("--steps", sk_steps, "sample count");
  sk->add_option("--model", sk_model, "optional checkpoint scored along the sweep");
  sk->add_option("--config", sk_config, "JSON config for the model");

  CLI::App* sm = sw->add_subcommand("melt", "staggered order parameter vs temperature");
  std::string sm_out;
  Eigen::Index sm_lattice = 4;
  double sm_u = 4.0;
  std::vector<double> sm_temps;
  int sm_n0 = 64;
  sm->add_option("--out", sm_out, "TSV path")->required();
  sm->add_option("--lattice", sm_lattice, "lattice side");
  sm->add_option("--u", sm_u, "interaction strength");
  sm->add_option("--temps", sm_temps, "temperatures")->required()->delimiter(',');
  sm->add_option("--n0", sm_n0, "positive frequencies per solve");

  // ---- diagnose ----
  CLI::App* dg = app.add_subcommand("diagnose", "entanglement/spectral report for one sample");
  std::string dg_model, dg_data, dg_config, dg_out;
  int dg_sample = 0;
  dg->add_option("--model", dg_model, "checkpoint")->required();
  dg->add_option("--data", dg_data, "sample container")->required();
  dg->add_option("--config", dg_config, "JSON config")->required();
  dg->add_option("--sample", dg_sample, "sample index");
  dg->add_option("--out", dg_out, "JSON report path (also printed)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gc_kappa->count() > 0) gc_cfg.sweep_kappa = false;
    if (gc->parsed()) run_gen_chern(gc_out, gc_count, gc_seed, gc_cfg);
    if (gm->parsed()) run_gen_mnist(gm_dir, gm_out, !gm_test, gm_pool, gm_limit);
    if (gf->parsed()) run_gen_fk(gf_out, gf_lattice, gf_u, gf_t1, gf_t0);
    if (tr->parsed()) run_train(tr_config, tr_model, tr_metrics, tr_best);
    if (ev->parsed()) run_eval(ev_model, ev_data, ev_config);
    if (sk->parsed()) run_sweep_kappa(sk_out, sk_lattice, sk_from, sk_to, sk_steps, sk_model, sk_config);
    if (sm->parsed()) run_sweep_melt(sm_out, sm_lattice, sm_u, sm_temps, sm_n0);
    if (dg->parsed()) run_diagnose(dg_model, dg_data, dg_config, dg_sample, dg_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
