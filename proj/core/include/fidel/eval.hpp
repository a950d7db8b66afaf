#ifndef FIDEL_EVAL_HPP_
#define FIDEL_EVAL_HPP_

#include <span>
#include <string>
#include <vector>

#include "fidel/data.hpp"
#include "fidel/genrec.hpp"
#include "fidel/model.hpp"

namespace fidel {

// Sample Pearson correlation of two equal-length vectors. A constant input
// makes the coefficient undefined; it is reported as 0 so that dead
// candidates count as non-matches.
double pearson(std::span<const double> a, std::span<const double> b);
double pearson(const Tensor& a, const Tensor& b);

struct RevealOutcome {
  std::size_t revealed = 0;             // unique private samples revealed
  std::vector<int> best_sample;         // per candidate: argmax-|r| private sample
  std::vector<double> best_abs_r;       // per candidate: that |r|
  std::vector<bool> sample_revealed;    // per private sample
  double mean_best_abs_r = 0.0;         // mean over private samples of best candidate |r|
};

// A private sample is revealed when some candidate's argmax-|r| match is that
// sample with |r| >= threshold; each sample counts once, each candidate
// reveals at most one sample.
RevealOutcome match_candidates(const std::vector<Tensor>& candidates,
                               const std::vector<Tensor>& private_batch, double threshold = 0.98);

std::size_t count_revealed(const std::vector<Tensor>& candidates,
                           const std::vector<Tensor>& private_batch, double threshold = 0.98);

enum class VictimArch : std::uint8_t { FCNN = 0, CNN };

struct SweepConfig {
  Source dataset = Source::MNIST;
  VictimArch arch = VictimArch::FCNN;
  std::vector<Activation> activations = {Activation::ReLU};
  std::vector<int> dropout_flags = {1};
  double dropout_rate = 0.5;
  std::vector<std::size_t> n_values = {30};
  std::size_t rounds = 200;
  std::size_t pretrain_epochs = 1;
  std::size_t pretrain_batch = 50;
  std::size_t client_batch = 50;  // 0 = full batch (batch size n)
  double learning_rate = 0.01;
  double threshold = 0.98;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool continue_model = false;  // keep training one global model across rounds
  GeneratorBudget generator_budget;  // CNN sweeps only
  std::string out_dir;               // when set: results.csv, summary.csv, plotdata.tsv
};

struct RoundResult {
  std::size_t round = 0;
  std::vector<std::size_t> private_indices;
  std::size_t revealed = 0;
  double mean_best_abs_r = 0.0;
};

struct CellResult {
  Activation activation = Activation::ReLU;
  bool dropout = false;
  std::size_t n = 0;
  std::vector<RoundResult> rounds;
  double mean_revealed = 0.0;
  double stderr_revealed = 0.0;
};

struct RevealReport {
  std::vector<CellResult> cells;

  const CellResult* find(Activation a, bool dropout, std::size_t n) const;
};

// Per (activation, dropout, n) cell: pretrain a victim snapshot, then run
// `rounds` independent measurements of pretrained victim -> client_train ->
// extract_partials (-> generator for CNN) -> reveal counting.
RevealReport run_sweep(const SweepConfig& cfg, const Dataset& train, const Dataset& test);

void write_report_csv(const RevealReport& report, const SweepConfig& cfg,
                      const std::string& out_dir);

}  // namespace fidel

#endif  // FIDEL_EVAL_HPP_
