#ifndef RPARETO_HARNESS_HPP
#define RPARETO_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rpareto/inference.hpp"

namespace rpareto {

// Experiment description; every field has a default reproducing the
// baseline simulation study (9x9 fine grid, 3x3 coarse subgrid, c=3,
// beta=0.5, alpha=2, m=100, u=1, 10000-step chains with 1000 burn-in).
struct ExperimentConfig {
  struct Geometry {
    std::vector<int> side_counts{9, 9};
    std::vector<double> spacing{1.0, 1.0};
    std::string coarse_kind = "stride";  // stride | indices | all
    std::vector<int> stride{4, 4};
    std::vector<int> indices;
    int s0_index = 40;  // grid center
  } geometry;

  struct Model {
    double c = 3.0;
    double beta = 0.5;
    double alpha = 2.0;
  } model;

  // Risk functional family; the exact (fine-grid) form drives generation
  // and the conditional method, its coarse counterpart the approx method.
  std::string risk = "mean";  // mean | sup

  struct Data {
    int m = 100;
    double u = 1.0;
    int generator_burn_in = 500;
    bool archive_fine = false;
  } data;

  struct Inference {
    PriorSpec prior;
    ProposalSpec proposal;
    int n_mcmc = 10000;
    int burn_in = 1000;
    int init_steps = 1000;  // observable warm-up chain for the start value
    int n_condx = 100;
    int n_cond_gauss = 2000;
    double q = 0.01;
    int n_min = 500;
    int n_max = 50000;
    std::string method = "approx";  // approx | conditional
  } inference;

  struct Benchmark {
    int repetitions = 100;
  } benchmark;

  std::uint64_t seed = 1;

  void validate() const;
  SiteSet build_sites() const;
  ModelParams true_params() const;
  RiskSpec fine_risk() const;
  RiskSpec coarse_risk() const;
  ChainSettings chain_settings() const;
  std::string to_json() const;  // full echo, for metadata files
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

struct Dataset {
  std::vector<Observation> obs;
  // Optional ground truth: one fine-grid field per observation.
  std::vector<std::vector<double>> fine_archive;
};

Dataset generate_dataset(const ExperimentConfig& cfg, const RngStream& master);

void write_dataset_csv(const Dataset& d, const std::string& path);
void write_fine_archive_csv(const Dataset& d, const std::string& path);
Dataset read_dataset_csv(const std::string& path, int n_coarse);

struct ChainSummary {
  // Order: beta, c, alpha.
  std::vector<double> mean, median, q025, q975;
};

ChainSummary summarize_chain(const std::vector<ChainState>& chain, int burn_in);

void write_chain_csv(const std::vector<ChainState>& chain, const std::string& path);
std::vector<ChainState> read_chain_csv(const std::string& path);
void write_summary_csv(const ChainSummary& s, const std::string& path);

struct FitResult {
  std::vector<ChainState> chain;
  ChainSummary summary;
  ChainDiagnostics diagnostics;
  ModelParams start;
};

// Runs the full fitting pipeline with the given method ("approx" or
// "conditional"): prior start draw, observable warm-up chain, main chain.
FitResult fit(const ExperimentConfig& cfg, const Dataset& dataset,
              const std::string& method, const RngStream& master);

struct SummaryRow {
  int repetition = 0;
  std::string method;
  bool ok = true;
  std::string error;
  // Order: beta, c, alpha.
  std::vector<double> est_mean, est_median;
  std::vector<double> sq_err_mean, sq_err_median;
};

struct BenchmarkResult {
  std::vector<SummaryRow> rows;  // 2 per repetition, merged by id
  // rmse[method][statistic] -> (beta, c, alpha); methods: approx,
  // conditional; statistics: mean, median.
  std::vector<std::string> methods{"conditional", "approx"};
  std::vector<std::string> statistics{"mean", "median"};
  std::vector<std::vector<std::vector<double>>> rmse;
  int completed = 0, failed = 0;
};

BenchmarkResult benchmark(const ExperimentConfig& cfg, const RngStream& master,
                          int n_threads);

void write_benchmark_rows_csv(const BenchmarkResult& r, const std::string& path);
void write_rmse_csv(const BenchmarkResult& r, const std::string& path);

// Metadata JSON written next to every run's outputs.
void write_metadata(const ExperimentConfig& cfg, const std::string& command,
                    const std::string& path);

std::string format_double(double v);  // round-trip safe ("%.17g")

}  // namespace rpareto

#endif
