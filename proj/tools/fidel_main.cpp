// Command-line front end: demos, attacks and reveal-count sweeps, each
// reproducible from a flat config plus seed. All figures are written as
// PGM/PPM and CSV/TSV files in the output directory.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fidel/archs.hpp"
#include "fidel/attack.hpp"
#include "fidel/config.hpp"
#include "fidel/data.hpp"
#include "fidel/eval.hpp"
#include "fidel/fed.hpp"
#include "fidel/genrec.hpp"
#include "fidel/serialize.hpp"
#include "fidel/synth.hpp"

namespace fs = std::filesystem;
using namespace fidel;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::string data_root;
  std::string out_dir;
};

KvConfig resolve_config(const CommonOpts& opts) {
  KvConfig cfg;
  if (!opts.config_path.empty()) cfg = KvConfig::load(opts.config_path);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opts.data_root.empty()) cfg.set("data_root", opts.data_root);
  if (!cfg.has("data_root")) {
    const char* env = std::getenv("FIDEL_DATA_ROOT");
    if (env) cfg.set("data_root", env);
  }
  if (!opts.out_dir.empty()) cfg.set("out_dir", opts.out_dir);
  return cfg;
}

Source dataset_of(const KvConfig& cfg) {
  const std::string d = cfg.get("dataset", "mnist");
  if (d == "mnist") return Source::MNIST;
  if (d == "cifar10") return Source::CIFAR10;
  throw std::invalid_argument("dataset must be mnist or cifar10, got: " + d);
}

VictimArch arch_of(const KvConfig& cfg) {
  const std::string a = cfg.get("arch", "fcnn");
  if (a == "fcnn") return VictimArch::FCNN;
  if (a == "cnn") return VictimArch::CNN;
  throw std::invalid_argument("arch must be fcnn or cnn, got: " + a);
}

std::string require_data_root(const KvConfig& cfg) {
  const std::string root = cfg.get("data_root", "");
  if (root.empty())
    throw io_error("no dataset root: pass --data-root, set data_root in the config, "
                   "or export FIDEL_DATA_ROOT");
  return root;
}

Dataset load_train(const KvConfig& cfg) {
  const std::string root = require_data_root(cfg);
  if (dataset_of(cfg) == Source::MNIST)
    return load_mnist(root + "/train-images-idx3-ubyte", root + "/train-labels-idx1-ubyte",
                      Split::Train);
  return load_cifar10_train(root);
}

Dataset load_test(const KvConfig& cfg) {
  const std::string root = require_data_root(cfg);
  if (dataset_of(cfg) == Source::MNIST)
    return load_mnist(root + "/t10k-images-idx3-ubyte", root + "/t10k-labels-idx1-ubyte",
                      Split::Test);
  return load_cifar10_test(root);
}

Model make_victim(const KvConfig& cfg, const Shape& input_shape) {
  const Activation act = activation_from_string(cfg.get("activation", "relu"));
  const double rate = cfg.get_bool("dropout", false) ? cfg.get_double("dropout_rate", 0.5) : 0.0;
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  if (arch_of(cfg) == VictimArch::FCNN) return make_fcnn(input_shape, act, rate, seed);
  return make_cnn(input_shape, act, rate, seed);
}

GeneratorBudget budget_of(const KvConfig& cfg) {
  GeneratorBudget b;
  b.max_epochs = static_cast<std::size_t>(cfg.get_int("gen_epochs", 50));
  b.max_seconds = cfg.get_double("gen_seconds", 600.0);
  b.batch_size = static_cast<std::size_t>(cfg.get_int("gen_batch", 32));
  b.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  return b;
}

std::string out_dir_of(const KvConfig& cfg) {
  const std::string out = cfg.get("out_dir", "");
  if (out.empty()) throw io_error("no output directory: pass --out or set out_dir");
  fs::create_directories(out);
  fs::create_directories(out + "/partials");
  fs::create_directories(out + "/candidates");
  cfg.write(out + "/config.snapshot");
  return out;
}

void check_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw std::range_error(what + ": non-finite values");
}

// Pretrained victim for a demo/attack round; loads a snapshot when
// model_in is set, otherwise pretrains from scratch.
Model demo_victim(const KvConfig& cfg, const Dataset& train) {
  const std::string model_in = cfg.get("model_in", "");
  if (!model_in.empty()) return load_model(model_in);
  Model victim = make_victim(cfg, train.samples.at(0).image.shape);
  const std::size_t epochs = static_cast<std::size_t>(cfg.get_int("pretrain_epochs", 1));
  if (epochs > 0)
    victim = pretrain(std::move(victim), train, epochs,
                      static_cast<std::size_t>(cfg.get_int("pretrain_batch", 50)),
                      cfg.get_double("learning_rate", 0.01),
                      static_cast<std::uint64_t>(cfg.get_int("seed", 1)));
  return victim;
}

ClientConfig client_config(const KvConfig& cfg, std::size_t n) {
  ClientConfig c;
  c.learning_rate = cfg.get_double("learning_rate", 0.01);
  c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  const std::string mode = cfg.get("batch_mode", "paper-batch-50");
  if (mode == "paper-batch-50")
    c.batch_size = 50;
  else if (mode == "full-batch")
    c.batch_size = n;
  else
    throw std::invalid_argument("batch_mode must be paper-batch-50 or full-batch");
  return c;
}

std::vector<Sample> draw_private(const KvConfig& cfg, const Dataset& pool, std::size_t n) {
  Rng rng(mix_seed(static_cast<std::uint64_t>(cfg.get_int("seed", 1)), 0x5EED));
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool.samples[idx[i]]);
  return out;
}

// First 24 partials as a normalized image grid (CNN partials: first 24
// channels of one neuron's partial).
void emit_partial_grid(const std::vector<PartialReconstruction>& partials, const Shape& shape,
                       const std::string& path) {
  std::vector<Tensor> tiles;
  if (shape.size() == 3 && shape[2] > 3) {
    // feature-space partial: slice channels of the strongest neuron
    const PartialReconstruction& best = reconstruct_single(partials);
    for (std::size_t c = 0; c < std::min<std::size_t>(24, shape[2]); ++c) {
      Tensor ch({shape[0], shape[1], 1});
      for (std::size_t y = 0; y < shape[0]; ++y)
        for (std::size_t x = 0; x < shape[1]; ++x)
          ch.data[y * shape[1] + x] = best.values.data[(y * shape[1] + x) * shape[2] + c];
      tiles.push_back(std::move(ch));
    }
  } else {
    for (std::size_t i = 0; i < std::min<std::size_t>(24, partials.size()); ++i)
      tiles.push_back(partials[i].values.reshaped(shape));
  }
  emit_image(tile_grid(tiles, 8), path, /*normalize=*/true);
}

int cmd_gen_data(const CommonOpts& opts) {
  const KvConfig cfg = resolve_config(opts);
  const std::string root = require_data_root(cfg);
  fs::create_directories(root);
  SynthSpec spec;
  spec.train_count = static_cast<std::size_t>(cfg.get_int("train_count", 60000));
  spec.test_count = static_cast<std::size_t>(cfg.get_int("test_count", 10000));
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 7));
  if (dataset_of(cfg) == Source::MNIST)
    write_synthetic_mnist(root, spec);
  else
    write_synthetic_cifar10(root, spec.seed);
  std::cout << "wrote synthetic " << cfg.get("dataset", "mnist") << " into " << root << "\n";
  return 0;
}

int cmd_pretrain(const CommonOpts& opts) {
  const KvConfig cfg = resolve_config(opts);
  const Dataset train = load_train(cfg);
  const Dataset test = load_test(cfg);
  Model victim = demo_victim(cfg, train);
  const double acc = evaluate_accuracy(victim, test);
  const std::string out = cfg.get("model_out", "");
  if (out.empty()) throw io_error("pretrain: model_out not set");
  save_model(victim, out);
  std::cout << "pretrained " << cfg.get("arch", "fcnn") << " on " << cfg.get("dataset", "mnist")
            << ", test accuracy " << acc << ", saved to " << out << "\n";
  return 0;
}

int cmd_train_generator(const CommonOpts& opts) {
  const KvConfig cfg = resolve_config(opts);
  const Dataset train = load_train(cfg);
  const Dataset test = load_test(cfg);
  const auto [aux, pool] = split_auxiliary(test);
  const Model victim = demo_victim(cfg, train);
  const auto pairs = build_pairs(victim, aux);
  Model gen = dataset_of(cfg) == Source::MNIST
                  ? make_gray_generator(static_cast<std::uint64_t>(cfg.get_int("seed", 1)))
                  : make_rgb_generator(static_cast<std::uint64_t>(cfg.get_int("seed", 1)));
  const TrainedGenerator trained = train_generator(pairs, std::move(gen), budget_of(cfg));
  const std::string out = cfg.get("generator_out", "");
  if (out.empty()) throw io_error("train-generator: generator_out not set");
  save_model(trained.model, out);
  std::cout << "generator trained for " << trained.loss_curve.size() << " epochs, final loss "
            << (trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back()) << ", saved to "
            << out << "\n";
  return 0;
}

int cmd_demo_single(const CommonOpts& opts) {
  const KvConfig cfg = resolve_config(opts);
  const std::string out = out_dir_of(cfg);
  const Dataset train = load_train(cfg);
  const Dataset test = load_test(cfg);
  const auto [aux, pool] = split_auxiliary(test);

  const Model victim = demo_victim(cfg, train);
  const std::vector<Sample> local = draw_private(cfg, pool, 1);
  const ClientResult client = client_train(victim, local, client_config(cfg, 1));
  const auto partials = extract_partials(client.update, victim);
  const FirstDenseInfo info = locate_first_dense(victim);

  emit_image(local[0].image,
             out + (local[0].image.shape[2] == 1 ? "/private.pgm" : "/private.ppm"));
  emit_partial_grid(partials, info.input_shape, out + "/partials/first24.pgm");

  const PartialReconstruction& best = reconstruct_single(partials);
  check_finite(best.values, "partial reconstruction");

  double best_r = 0.0;
  Tensor candidate = best.values;
  if (arch_of(cfg) == VictimArch::CNN) {
    const std::string gen_path = cfg.get("generator_in", "");
    TrainedGenerator gen;
    if (gen_path.empty()) {
      const auto pairs = build_pairs(victim, aux);
      Model gm = dataset_of(cfg) == Source::MNIST
                     ? make_gray_generator(static_cast<std::uint64_t>(cfg.get_int("seed", 1)))
                     : make_rgb_generator(static_cast<std::uint64_t>(cfg.get_int("seed", 1)));
      gen = train_generator(pairs, std::move(gm), budget_of(cfg));
    } else {
      gen.model = load_model(gen_path);
    }
    candidate = generate(gen, best);
    emit_image(candidate, out + (candidate.shape[2] == 1 ? "/candidates/best.pgm"
                                                         : "/candidates/best.ppm"));
    best_r = std::fabs(pearson(candidate, local[0].image));
  } else {
    best_r = std::fabs(pearson(candidate.reshaped(local[0].image.shape), local[0].image));
    emit_image(candidate.reshaped(local[0].image.shape),
               out + (local[0].image.shape[2] == 1 ? "/candidates/best.pgm"
                                                   : "/candidates/best.ppm"),
               true);
  }
  check_finite(candidate, "candidate");

  std::ofstream metrics(out + "/metrics.txt");
  metrics << "neuron " << best.neuron << "\nbias_delta " << best.bias_delta << "\nbest_abs_r "
          << best_r << "\n";
  std::cout << "demo-single: best |r| = " << best_r << ", outputs in " << out << "\n";
  return 0;
}

int cmd_demo_batch(const CommonOpts& opts) {
  const KvConfig cfg = resolve_config(opts);
  const std::string out = out_dir_of(cfg);
  const std::size_t n = static_cast<std::size_t>(cfg.get_int("n", 10));
  if (n < 2) throw std::invalid_argument("demo-batch: n must be >= 2");
  const Dataset train = load_train(cfg);
  const Dataset test = load_test(cfg);
  const auto [aux, pool] = split_auxiliary(test);

  const Model victim = demo_victim(cfg, train);
  const std::vector<Sample> local = draw_private(cfg, pool, n);
  const ClientResult client = client_train(victim, local, client_config(cfg, n));
  const auto partials = extract_partials(client.update, victim);
  const FirstDenseInfo info = locate_first_dense(victim);

  std::vector<Tensor> batch_tiles;
  std::vector<Tensor> private_images;
  for (const Sample& s : local) {
    batch_tiles.push_back(s.image);
    private_images.push_back(s.image);
  }
  emit_image(tile_grid(batch_tiles, 8), out + (batch_tiles[0].shape[2] == 1 ? "/batch.pgm"
                                                                            : "/batch.ppm"));
  emit_partial_grid(partials, info.input_shape, out + "/partials/first24.pgm");

  std::vector<Tensor> candidates;
  if (arch_of(cfg) == VictimArch::CNN) {
    const std::string gen_path = cfg.get("generator_in", "");
    TrainedGenerator gen;
    if (gen_path.empty()) {
      const auto pairs = build_pairs(victim, aux);
      Model gm = dataset_of(cfg) == Source::MNIST
                     ? make_gray_generator(static_cast<std::uint64_t>(cfg.get_int("seed", 1)))
                     : make_rgb_generator(static_cast<std::uint64_t>(cfg.get_int("seed", 1)));
      gen = train_generator(pairs, std::move(gm), budget_of(cfg));
    } else {
      gen.model = load_model(gen_path);
    }
    candidates = generate_batch_candidates(gen, partials);
    if (!candidates.empty())
      emit_image(tile_grid(candidates, 10),
                 out + (candidates[0].shape[2] == 1 ? "/candidates/mosaic.pgm"
                                                    : "/candidates/mosaic.ppm"));
  } else {
    std::vector<Tensor> live_tiles;
    for (const auto& p : partials) {
      if (p.dead || p.kind != PartialReconstruction::Kind::Exact) continue;
      candidates.push_back(p.values);
      live_tiles.push_back(p.values.reshaped(private_images[0].shape));
    }
    if (!live_tiles.empty()) {
      std::vector<Tensor> norm_tiles;
      for (auto& t : live_tiles) norm_tiles.push_back(t);
      emit_image(tile_grid(norm_tiles, 10), out + "/candidates/mosaic.pgm", true);
    }
  }

  std::ofstream table(out + "/results.csv");
  table << "sample,best_abs_r,revealed\n";
  if (!candidates.empty()) {
    const RevealOutcome outcome =
        match_candidates(candidates, private_images, cfg.get_double("threshold", 0.98));
    std::vector<double> best_r(n, 0.0);
    for (std::size_t c = 0; c < candidates.size(); ++c)
      if (outcome.best_sample[c] >= 0)
        best_r[outcome.best_sample[c]] =
            std::max(best_r[outcome.best_sample[c]], outcome.best_abs_r[c]);
    for (std::size_t s = 0; s < n; ++s)
      table << s << "," << best_r[s] << "," << (outcome.sample_revealed[s] ? 1 : 0) << "\n";
    std::cout << "demo-batch: revealed " << outcome.revealed << " of " << n << ", outputs in "
              << out << "\n";
  } else {
    for (std::size_t s = 0; s < n; ++s) table << s << ",0,0\n";
    std::cout << "demo-batch: no live candidates\n";
  }
  return 0;
}

int cmd_sweep(const CommonOpts& opts) {
  const KvConfig cfg = resolve_config(opts);
  const std::string out = out_dir_of(cfg);

  SweepConfig sc;
  sc.dataset = dataset_of(cfg);
  sc.arch = arch_of(cfg);
  sc.activations.clear();
  for (const std::string& a : cfg.get_str_list("activations", {"relu"}))
    sc.activations.push_back(activation_from_string(a));
  sc.dropout_flags.clear();
  for (const std::string& d : cfg.get_str_list("dropout_flags", {"1"}))
    sc.dropout_flags.push_back(d == "1" || d == "true" ? 1 : 0);
  sc.dropout_rate = cfg.get_double("dropout_rate", 0.5);
  sc.n_values = cfg.get_size_list("n_list", {30});
  sc.rounds = static_cast<std::size_t>(cfg.get_int("rounds", 200));
  sc.pretrain_epochs = static_cast<std::size_t>(cfg.get_int("pretrain_epochs", 1));
  sc.pretrain_batch = static_cast<std::size_t>(cfg.get_int("pretrain_batch", 50));
  sc.client_batch = cfg.get("batch_mode", "paper-batch-50") == "full-batch" ? 0 : 50;
  sc.learning_rate = cfg.get_double("learning_rate", 0.01);
  sc.threshold = cfg.get_double("threshold", 0.98);
  sc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  sc.threads = static_cast<std::size_t>(cfg.get_int("threads", 1));
  sc.continue_model = cfg.get_bool("continue_model", false);
  sc.generator_budget = budget_of(cfg);
  sc.out_dir = out;

  const Dataset train = load_train(cfg);
  const Dataset test = load_test(cfg);
  const RevealReport report = run_sweep(sc, train, test);
  for (const CellResult& c : report.cells)
    std::cout << to_string(c.activation) << (c.dropout ? "+dropout" : "") << " n=" << c.n
              << ": mean revealed " << c.mean_revealed << " (stderr " << c.stderr_revealed
              << ")\n";
  std::cout << "sweep outputs in " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-dense-layer gradient leakage laboratory"};
  app.require_subcommand(1);

  CommonOpts opts;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config_path, "flat key = value config file");
    sub->add_option("-s,--set", opts.overrides, "override: key=value")->take_all();
    sub->add_option("--data-root", opts.data_root, "dataset root directory");
    sub->add_option("-o,--out", opts.out_dir, "output directory");
  };

  int (*handler)(const CommonOpts&) = nullptr;
  const auto bind = [&](const char* name, const char* help, int (*fn)(const CommonOpts&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    sub->callback([&handler, fn] { handler = fn; });
  };

  bind("demo-single", "single private sample attack demo", cmd_demo_single);
  bind("demo-batch", "multi-sample attack demo", cmd_demo_batch);
  bind("sweep", "reveal-count sweep over activations/dropout/n", cmd_sweep);
  bind("pretrain", "pretrain a victim model and save it", cmd_pretrain);
  bind("train-generator", "train a feature-inverting generator", cmd_train_generator);
  bind("gen-data", "write synthetic stand-in datasets in canonical formats", cmd_gen_data);

  CLI11_PARSE(app, argc, argv);

  try {
    return handler(opts);
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::range_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
