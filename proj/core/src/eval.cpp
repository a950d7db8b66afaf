#include "fidel/eval.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "fidel/archs.hpp"
#include "fidel/attack.hpp"
#include "fidel/fed.hpp"

namespace fidel {

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("pearson: need equal lengths >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;  // undefined for constant input
  return sab / std::sqrt(saa * sbb);
}

double pearson(const Tensor& a, const Tensor& b) {
  return pearson(std::span<const double>(a.data), std::span<const double>(b.data));
}

RevealOutcome match_candidates(const std::vector<Tensor>& candidates,
                               const std::vector<Tensor>& private_batch, double threshold) {
  if (private_batch.empty()) throw std::invalid_argument("match_candidates: empty private batch");
  RevealOutcome out;
  out.sample_revealed.assign(private_batch.size(), false);
  std::vector<double> best_for_sample(private_batch.size(), 0.0);

  for (const Tensor& cand : candidates) {
    int best = -1;
    double best_r = -1.0;
    for (std::size_t s = 0; s < private_batch.size(); ++s) {
      const double r = std::fabs(pearson(cand, private_batch[s]));
      if (r > best_r) {
        best_r = r;
        best = static_cast<int>(s);
      }
      best_for_sample[s] = std::max(best_for_sample[s], r);
    }
    out.best_sample.push_back(best);
    out.best_abs_r.push_back(best_r);
    if (best >= 0 && best_r >= threshold) out.sample_revealed[best] = true;
  }
  for (bool r : out.sample_revealed) out.revealed += r ? 1 : 0;
  out.mean_best_abs_r = std::accumulate(best_for_sample.begin(), best_for_sample.end(), 0.0) /
                        static_cast<double>(private_batch.size());
  return out;
}

std::size_t count_revealed(const std::vector<Tensor>& candidates,
                           const std::vector<Tensor>& private_batch, double threshold) {
  return match_candidates(candidates, private_batch, threshold).revealed;
}

const CellResult* RevealReport::find(Activation a, bool dropout, std::size_t n) const {
  for (const CellResult& c : cells)
    if (c.activation == a && c.dropout == dropout && c.n == n) return &c;
  return nullptr;
}

namespace {

Model make_victim(const SweepConfig& cfg, Activation act, bool dropout, const Shape& input_shape,
                  std::uint64_t seed) {
  const double rate = dropout ? cfg.dropout_rate : 0.0;
  if (cfg.arch == VictimArch::FCNN) return make_fcnn(input_shape, act, rate, seed);
  return make_cnn(input_shape, act, rate, seed);
}

std::vector<std::size_t> draw_without_replacement(std::size_t pool, std::size_t n, Rng& rng) {
  if (n > pool) throw std::invalid_argument("draw: n exceeds pool size");
  std::vector<std::size_t> idx(pool);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i)
    std::swap(idx[i], idx[i + rng.below(pool - i)]);
  idx.resize(n);
  return idx;
}

struct CellContext {
  const SweepConfig* cfg;
  const Dataset* pool;
  const Model* snapshot;
  const TrainedGenerator* generator;  // null for FCNN
  std::uint64_t cell_seed;
  std::size_t n;
};

RoundResult run_round(const CellContext& ctx, std::size_t round, const Model& global) {
  const SweepConfig& cfg = *ctx.cfg;
  Rng draw_rng(mix_seed(ctx.cell_seed, 0x1000 + round));
  RoundResult res;
  res.round = round;
  res.private_indices = draw_without_replacement(ctx.pool->size(), ctx.n, draw_rng);

  std::vector<Sample> local;
  std::vector<Tensor> private_images;
  for (std::size_t i : res.private_indices) {
    local.push_back(ctx.pool->samples[i]);
    private_images.push_back(ctx.pool->samples[i].image);
  }

  ClientConfig ccfg;
  ccfg.epochs = 1;
  ccfg.batch_size = cfg.client_batch == 0 ? ctx.n : cfg.client_batch;
  ccfg.learning_rate = cfg.learning_rate;
  ccfg.seed = mix_seed(ctx.cell_seed, 0x2000 + round);
  ClientResult client = client_train(global, local, ccfg);

  const auto partials = extract_partials(client.update, global);
  std::vector<Tensor> candidates;
  if (ctx.generator) {
    candidates = generate_batch_candidates(*ctx.generator, partials);
  } else {
    for (const auto& p : partials) {
      if (p.dead || p.kind != PartialReconstruction::Kind::Exact) continue;
      candidates.push_back(p.values);
    }
  }

  if (candidates.empty()) {
    res.revealed = 0;
    res.mean_best_abs_r = 0.0;
    return res;
  }
  const RevealOutcome outcome = match_candidates(candidates, private_images, cfg.threshold);
  res.revealed = outcome.revealed;
  res.mean_best_abs_r = outcome.mean_best_abs_r;
  return res;
}

}  // namespace

RevealReport run_sweep(const SweepConfig& cfg, const Dataset& train, const Dataset& test) {
  if (cfg.rounds < 1) throw std::invalid_argument("run_sweep: rounds must be >= 1");
  for (std::size_t n : cfg.n_values)
    if (n < 1) throw std::invalid_argument("run_sweep: n must be >= 1");

  const auto [aux, pool] = split_auxiliary(test);
  const Shape input_shape = train.samples.at(0).image.shape;

  RevealReport report;
  std::size_t cell_index = 0;
  for (Activation act : cfg.activations) {
    for (int dropout : cfg.dropout_flags) {
      // victim snapshot and generator are shared by every n and round of
      // this (activation, dropout) block
      const std::uint64_t block_seed = mix_seed(cfg.seed, 0x100 + cell_index);
      Model victim = make_victim(cfg, act, dropout != 0, input_shape, block_seed);
      if (cfg.pretrain_epochs > 0)
        victim = pretrain(std::move(victim), train, cfg.pretrain_epochs, cfg.pretrain_batch,
                          cfg.learning_rate, block_seed);

      TrainedGenerator generator;
      const bool use_generator = cfg.arch == VictimArch::CNN;
      if (use_generator) {
        const auto pairs = build_pairs(victim, aux);
        Model gen_model = input_shape[2] == 1 ? make_gray_generator(block_seed)
                                              : make_rgb_generator(block_seed);
        GeneratorBudget budget = cfg.generator_budget;
        budget.seed = mix_seed(block_seed, 0x77);
        generator = train_generator(pairs, std::move(gen_model), budget);
      }

      for (std::size_t n : cfg.n_values) {
        CellResult cell;
        cell.activation = act;
        cell.dropout = dropout != 0;
        cell.n = n;
        cell.rounds.resize(cfg.rounds);

        CellContext ctx;
        ctx.cfg = &cfg;
        ctx.pool = &pool;
        ctx.snapshot = &victim;
        ctx.generator = use_generator ? &generator : nullptr;
        ctx.cell_seed = mix_seed(block_seed, n);
        ctx.n = n;

        if (cfg.continue_model) {
          Model global = victim;
          for (std::size_t r = 0; r < cfg.rounds; ++r) {
            cell.rounds[r] = run_round(ctx, r, global);
            // re-run the client to fold its update into the global model
            ClientConfig ccfg;
            ccfg.batch_size = cfg.client_batch == 0 ? n : cfg.client_batch;
            ccfg.learning_rate = cfg.learning_rate;
            ccfg.seed = mix_seed(ctx.cell_seed, 0x2000 + r);
            std::vector<Sample> local;
            for (std::size_t i : cell.rounds[r].private_indices)
              local.push_back(pool.samples[i]);
            global = client_train(global, local, ccfg).model;
          }
        } else if (cfg.threads > 1) {
          std::vector<std::thread> workers;
          const std::size_t nt = std::min(cfg.threads, cfg.rounds);
          for (std::size_t t = 0; t < nt; ++t) {
            workers.emplace_back([&, t] {
              for (std::size_t r = t; r < cfg.rounds; r += nt)
                cell.rounds[r] = run_round(ctx, r, victim);
            });
          }
          for (auto& w : workers) w.join();
        } else {
          for (std::size_t r = 0; r < cfg.rounds; ++r)
            cell.rounds[r] = run_round(ctx, r, victim);
        }

        double sum = 0.0, sumsq = 0.0;
        for (const RoundResult& r : cell.rounds) {
          sum += static_cast<double>(r.revealed);
          sumsq += static_cast<double>(r.revealed) * static_cast<double>(r.revealed);
        }
        const double m = sum / static_cast<double>(cfg.rounds);
        cell.mean_revealed = m;
        cell.stderr_revealed =
            cfg.rounds > 1
                ? std::sqrt(std::max(0.0, (sumsq / cfg.rounds - m * m) / (cfg.rounds - 1)))
                : 0.0;
        report.cells.push_back(std::move(cell));
      }
      ++cell_index;
    }
  }

  if (!cfg.out_dir.empty()) write_report_csv(report, cfg, cfg.out_dir);
  return report;
}

void write_report_csv(const RevealReport& report, const SweepConfig& cfg,
                      const std::string& out_dir) {
  const std::string dataset = cfg.dataset == Source::MNIST ? "mnist" : "cifar10";
  const std::string arch = cfg.arch == VictimArch::FCNN ? "fcnn" : "cnn";

  std::ofstream results(out_dir + "/results.csv");
  if (!results) throw io_error(out_dir + "/results.csv: cannot open for writing");
  results << "dataset,arch,activation,dropout,n,round,revealed,mean_abs_r_best\n";
  for (const CellResult& c : report.cells)
    for (const RoundResult& r : c.rounds)
      results << dataset << "," << arch << "," << to_string(c.activation) << ","
              << (c.dropout ? 1 : 0) << "," << c.n << "," << r.round << "," << r.revealed << ","
              << r.mean_best_abs_r << "\n";

  std::ofstream summary(out_dir + "/summary.csv");
  summary << "dataset,arch,activation,dropout,n,mean_revealed,stderr\n";
  for (const CellResult& c : report.cells)
    summary << dataset << "," << arch << "," << to_string(c.activation) << ","
            << (c.dropout ? 1 : 0) << "," << c.n << "," << c.mean_revealed << ","
            << c.stderr_revealed << "\n";

  // plain TSV mirroring the reveal-count figure axes: one column block per
  // (activation, dropout) series, rows over n
  std::ofstream plot(out_dir + "/plotdata.tsv");
  plot << "n";
  for (Activation a : cfg.activations)
    for (int d : cfg.dropout_flags)
      plot << "\t" << to_string(a) << (d ? "+dropout" : "");
  plot << "\n";
  for (std::size_t n : cfg.n_values) {
    plot << n;
    for (Activation a : cfg.activations)
      for (int d : cfg.dropout_flags) {
        const CellResult* c = report.find(a, d != 0, n);
        plot << "\t" << (c ? c->mean_revealed : 0.0);
      }
    plot << "\n";
  }
}

}  // namespace fidel
