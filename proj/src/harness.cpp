#include "rpareto/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "rpareto/errors.hpp"

namespace rpareto {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

double parse_csv_double(const std::string& tok, const char* what) {
  try {
    size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw usage_error(std::string("malformed ") + what + " field: '" + tok + "'");
  }
}

long parse_csv_long(const std::string& tok, const char* what) {
  try {
    size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw usage_error(std::string("malformed ") + what + " field: '" + tok + "'");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::ofstream open_output(const std::string& path) {
  const auto dir = std::filesystem::path(path).parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw usage_error("cannot open for writing: " + path);
  return f;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw usage_error("cannot open for reading: " + path);
  return f;
}

}  // namespace

void ExperimentConfig::validate() const {
  build_sites();  // geometry checks
  true_params().validate();
  if (risk != "mean" && risk != "sup")
    throw usage_error("config: risk must be 'mean' or 'sup'");
  if (data.m < 0) throw usage_error("config: m must be >= 0");
  if (!(data.u > 0.0)) throw usage_error("config: threshold u must be positive");
  if (data.generator_burn_in < 0)
    throw usage_error("config: generator burn-in must be >= 0");
  const auto& inf = inference;
  if (inf.n_mcmc < 1 || inf.init_steps < 0 || inf.n_condx < 1 ||
      inf.n_cond_gauss < 1 || inf.n_min < 1 || inf.n_max < inf.n_min)
    throw usage_error("config: inference counts must be positive (n_max >= n_min)");
  if (inf.burn_in < 0 || inf.burn_in >= inf.n_mcmc + 1)
    throw usage_error("config: burn-in discard must be < chain length");
  if (!(inf.q > 0.0)) throw usage_error("config: accuracy bound q must be positive");
  if (inf.method != "approx" && inf.method != "conditional")
    throw usage_error("config: method must be 'approx' or 'conditional'");
  if (benchmark.repetitions < 2)
    throw usage_error("config: benchmark needs at least 2 repetitions");
}

SiteSet ExperimentConfig::build_sites() const {
  CoarsePattern pattern;
  if (geometry.coarse_kind == "stride")
    pattern = CoarsePattern::with_stride(geometry.stride);
  else if (geometry.coarse_kind == "indices")
    pattern = CoarsePattern::with_indices(geometry.indices);
  else if (geometry.coarse_kind == "all")
    pattern = CoarsePattern::all();
  else
    throw usage_error("config: coarse pattern must be stride, indices or all");
  return build_regular_grid(geometry.side_counts, geometry.spacing, pattern,
                            geometry.s0_index);
}

ModelParams ExperimentConfig::true_params() const {
  return {{model.c, model.beta}, model.alpha};
}

RiskSpec ExperimentConfig::fine_risk() const {
  return risk == "sup" ? RiskSpec::fine_sup() : RiskSpec::fine_mean();
}

RiskSpec ExperimentConfig::coarse_risk() const {
  return risk == "sup" ? RiskSpec{RiskSpec::Kind::Sup, RiskSpec::Target::Coarse, {}}
                       : RiskSpec::coarse_mean();
}

ChainSettings ExperimentConfig::chain_settings() const {
  return {inference.n_mcmc, inference.n_condx, inference.n_cond_gauss,
          inference.q, inference.n_min, inference.n_max};
}

namespace {

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["geometry"] = {{"side_counts", c.geometry.side_counts},
                   {"spacing", c.geometry.spacing},
                   {"coarse", c.geometry.coarse_kind},
                   {"stride", c.geometry.stride},
                   {"indices", c.geometry.indices},
                   {"s0_index", c.geometry.s0_index}};
  j["model"] = {{"c", c.model.c}, {"beta", c.model.beta}, {"alpha", c.model.alpha}};
  j["risk"] = c.risk;
  j["data"] = {{"m", c.data.m},
               {"u", c.data.u},
               {"generator_burn_in", c.data.generator_burn_in},
               {"archive_fine", c.data.archive_fine}};
  j["inference"] = {
      {"prior",
       {{"log_c_mean", c.inference.prior.log_c_mean},
        {"log_c_sd", c.inference.prior.log_c_sd},
        {"log_alpha_mean", c.inference.prior.log_alpha_mean},
        {"log_alpha_sd", c.inference.prior.log_alpha_sd}}},
      {"proposal",
       {{"log_c_sd", c.inference.proposal.log_c_sd},
        {"log_alpha_sd", c.inference.proposal.log_alpha_sd},
        {"beta_halfwidth", c.inference.proposal.beta_halfwidth},
        {"beta_boundary",
         c.inference.proposal.boundary == BetaBoundary::Reflect ? "reflect"
                                                                : "clamp"}}},
      {"n_mcmc", c.inference.n_mcmc},
      {"burn_in", c.inference.burn_in},
      {"init_steps", c.inference.init_steps},
      {"n_condx", c.inference.n_condx},
      {"n_cond_gauss", c.inference.n_cond_gauss},
      {"q", c.inference.q},
      {"n_min", c.inference.n_min},
      {"n_max", c.inference.n_max},
      {"method", c.inference.method}};
  j["benchmark"] = {{"repetitions", c.benchmark.repetitions}};
  j["seed"] = c.seed;
  return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  return config_to_json(*this).dump(2) + "\n";
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw usage_error(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    if (j.contains("geometry")) {
      const json& g = j["geometry"];
      maybe(g, "side_counts", c.geometry.side_counts);
      maybe(g, "spacing", c.geometry.spacing);
      maybe(g, "coarse", c.geometry.coarse_kind);
      maybe(g, "stride", c.geometry.stride);
      maybe(g, "indices", c.geometry.indices);
      maybe(g, "s0_index", c.geometry.s0_index);
    }
    if (j.contains("model")) {
      const json& m = j["model"];
      maybe(m, "c", c.model.c);
      maybe(m, "beta", c.model.beta);
      maybe(m, "alpha", c.model.alpha);
    }
    maybe(j, "risk", c.risk);
    if (j.contains("data")) {
      const json& d = j["data"];
      maybe(d, "m", c.data.m);
      maybe(d, "u", c.data.u);
      maybe(d, "generator_burn_in", c.data.generator_burn_in);
      maybe(d, "archive_fine", c.data.archive_fine);
    }
    if (j.contains("inference")) {
      const json& i = j["inference"];
      if (i.contains("prior")) {
        const json& p = i["prior"];
        maybe(p, "log_c_mean", c.inference.prior.log_c_mean);
        maybe(p, "log_c_sd", c.inference.prior.log_c_sd);
        maybe(p, "log_alpha_mean", c.inference.prior.log_alpha_mean);
        maybe(p, "log_alpha_sd", c.inference.prior.log_alpha_sd);
      }
      if (i.contains("proposal")) {
        const json& p = i["proposal"];
        maybe(p, "log_c_sd", c.inference.proposal.log_c_sd);
        maybe(p, "log_alpha_sd", c.inference.proposal.log_alpha_sd);
        maybe(p, "beta_halfwidth", c.inference.proposal.beta_halfwidth);
        if (p.contains("beta_boundary")) {
          const std::string b = p.at("beta_boundary").get<std::string>();
          if (b == "reflect")
            c.inference.proposal.boundary = BetaBoundary::Reflect;
          else if (b == "clamp")
            c.inference.proposal.boundary = BetaBoundary::Clamp;
          else
            throw usage_error("config: beta_boundary must be reflect or clamp");
        }
      }
      maybe(i, "n_mcmc", c.inference.n_mcmc);
      maybe(i, "burn_in", c.inference.burn_in);
      maybe(i, "init_steps", c.inference.init_steps);
      maybe(i, "n_condx", c.inference.n_condx);
      maybe(i, "n_cond_gauss", c.inference.n_cond_gauss);
      maybe(i, "q", c.inference.q);
      maybe(i, "n_min", c.inference.n_min);
      maybe(i, "n_max", c.inference.n_max);
      maybe(i, "method", c.inference.method);
    }
    if (j.contains("benchmark")) {
      maybe(j["benchmark"], "repetitions", c.benchmark.repetitions);
    }
    maybe(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw usage_error(std::string("config: bad field type: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f = open_input(path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

Dataset generate_dataset(const ExperimentConfig& cfg, const RngStream& master) {
  const SiteSet sites = cfg.build_sites();
  const ModelParams params = cfg.true_params();
  const RiskSpec spec = cfg.fine_risk();
  Dataset d;
  d.obs.reserve(cfg.data.m);
  for (int i = 0; i < cfg.data.m; ++i) {
    RngStream rng = master.fork(i);
    std::vector<double> field =
        sample_r_pareto(sites, params, spec, cfg.data.generator_burn_in, rng);
    Observation o;
    o.id = i;
    o.x0 = field[sites.s0_fine()];
    o.xs.resize(sites.n_coarse());
    o.present.assign(sites.n_coarse(), 1);
    for (int k = 1; k <= sites.n_coarse(); ++k)
      o.xs[k - 1] = field[sites.coarse_in_fine[k]];
    d.obs.push_back(std::move(o));
    if (cfg.data.archive_fine) d.fine_archive.push_back(std::move(field));
  }
  return d;
}

void write_dataset_csv(const Dataset& d, const std::string& path) {
  std::ofstream f = open_output(path);
  f << "obs_id,site_id,value\n";
  for (const auto& o : d.obs) {
    f << o.id << ",0," << format_double(o.x0) << "\n";
    for (size_t k = 0; k < o.xs.size(); ++k) {
      f << o.id << "," << (k + 1) << ",";
      if (o.present[k])
        f << format_double(o.xs[k]);
      else
        f << "NA";
      f << "\n";
    }
  }
}

void write_fine_archive_csv(const Dataset& d, const std::string& path) {
  std::ofstream f = open_output(path);
  f << "obs_id,fine_index,value\n";
  for (size_t i = 0; i < d.fine_archive.size(); ++i)
    for (size_t s = 0; s < d.fine_archive[i].size(); ++s)
      f << i << "," << s << "," << format_double(d.fine_archive[i][s]) << "\n";
}

Dataset read_dataset_csv(const std::string& path, int n_coarse) {
  std::ifstream f = open_input(path);
  std::string line;
  if (!std::getline(f, line) || split_csv_line(line) !=
      std::vector<std::string>{"obs_id", "site_id", "value"})
    throw usage_error("dataset: missing or wrong header in " + path);
  std::map<int, Observation> by_id;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tok = split_csv_line(line);
    if (tok.size() != 3) throw usage_error("dataset: bad row: " + line);
    const int id = int(parse_csv_long(tok[0], "obs_id"));
    const int site = int(parse_csv_long(tok[1], "site_id"));
    if (site < 0 || site > n_coarse)
      throw usage_error("dataset: site_id out of range: " + tok[1]);
    Observation& o = by_id[id];
    if (o.xs.empty()) {
      o.id = id;
      o.xs.assign(n_coarse, 0.0);
      o.present.assign(n_coarse, 0);
    }
    if (site == 0) {
      if (tok[2] == "NA") throw usage_error("dataset: the s0 value cannot be NA");
      o.x0 = parse_csv_double(tok[2], "value");
    } else if (tok[2] != "NA") {
      o.xs[site - 1] = parse_csv_double(tok[2], "value");
      o.present[site - 1] = 1;
    }
  }
  Dataset d;
  for (auto& [id, o] : by_id) d.obs.push_back(std::move(o));
  return d;
}

void write_chain_csv(const std::vector<ChainState>& chain, const std::string& path) {
  std::ofstream f = open_output(path);
  f << "iter,beta,c,alpha,log_posterior,accepted,n_exceedances\n";
  for (size_t i = 0; i < chain.size(); ++i) {
    const ChainState& s = chain[i];
    f << i << "," << format_double(s.params.variogram.beta) << ","
      << format_double(s.params.variogram.c) << ","
      << format_double(s.params.alpha) << "," << format_double(s.log_posterior)
      << "," << (s.accepted ? 1 : 0) << "," << s.exceedance_count << "\n";
  }
}

std::vector<ChainState> read_chain_csv(const std::string& path) {
  std::ifstream f = open_input(path);
  std::string line;
  if (!std::getline(f, line) ||
      split_csv_line(line) != std::vector<std::string>{"iter", "beta", "c", "alpha",
                                                       "log_posterior", "accepted",
                                                       "n_exceedances"})
    throw usage_error("chain: missing or wrong header in " + path);
  std::vector<ChainState> chain;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tok = split_csv_line(line);
    if (tok.size() != 7) throw usage_error("chain: bad row: " + line);
    ChainState s;
    s.params.variogram.beta = parse_csv_double(tok[1], "beta");
    s.params.variogram.c = parse_csv_double(tok[2], "c");
    s.params.alpha = parse_csv_double(tok[3], "alpha");
    s.log_posterior = parse_csv_double(tok[4], "log_posterior");
    s.accepted = parse_csv_long(tok[5], "accepted") != 0;
    s.exceedance_count = int(parse_csv_long(tok[6], "n_exceedances"));
    chain.push_back(s);
  }
  return chain;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * double(n - 1);
  const size_t lo = size_t(std::floor(h));
  const size_t hi = std::min(lo + 1, n - 1);
  const double w = h - double(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

}  // namespace

ChainSummary summarize_chain(const std::vector<ChainState>& chain, int burn_in) {
  if (burn_in < 0) throw usage_error("summarize: burn-in must be >= 0");
  if (size_t(burn_in) >= chain.size())
    throw usage_error("summarize: burn-in is not smaller than the chain length");
  const size_t n = chain.size() - size_t(burn_in);
  ChainSummary out;
  for (int p = 0; p < 3; ++p) {
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) {
      const ModelParams& m = chain[burn_in + i].params;
      v[i] = (p == 0) ? m.variogram.beta : (p == 1) ? m.variogram.c : m.alpha;
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(n);
    std::sort(v.begin(), v.end());
    out.mean.push_back(mean);
    out.median.push_back(quantile_sorted(v, 0.5));
    out.q025.push_back(quantile_sorted(v, 0.025));
    out.q975.push_back(quantile_sorted(v, 0.975));
  }
  return out;
}

void write_summary_csv(const ChainSummary& s, const std::string& path) {
  std::ofstream f = open_output(path);
  f << "parameter,mean,median,q025,q975\n";
  const char* names[3] = {"beta", "c", "alpha"};
  for (int p = 0; p < 3; ++p)
    f << names[p] << "," << format_double(s.mean[p]) << ","
      << format_double(s.median[p]) << "," << format_double(s.q025[p]) << ","
      << format_double(s.q975[p]) << "\n";
}

namespace {
// Fit-stage stream tags under the per-run master stream.
enum FitTag : std::uint64_t { kStartDraw = 10, kWarmup = 11, kMainChain = 12 };
}  // namespace

FitResult fit(const ExperimentConfig& cfg, const Dataset& dataset,
              const std::string& method, const RngStream& master) {
  if (method != "approx" && method != "conditional")
    throw usage_error("fit: method must be 'approx' or 'conditional'");
  const SiteSet sites = cfg.build_sites();
  const PriorSpec& prior = cfg.inference.prior;
  const ProposalSpec& proposal = cfg.inference.proposal;
  const double u = cfg.data.u;

  // Start value: a prior draw refined by a short chain against the
  // observable (approx) posterior.
  ModelParams start;
  {
    RngStream rng = master.fork(kStartDraw);
    start.variogram.c = std::exp(prior.log_c_mean + prior.log_c_sd * rng.normal());
    start.alpha = std::exp(prior.log_alpha_mean + prior.log_alpha_sd * rng.normal());
    start.variogram.beta = std::max(2.0 * rng.uniform(), 1e-9);
  }
  if (cfg.inference.init_steps > 0) {
    ChainSettings warm_settings = cfg.chain_settings();
    warm_settings.n_mcmc = cfg.inference.init_steps;
    const auto warm =
        run_observable_chain(dataset.obs, u, cfg.coarse_risk(), sites, prior,
                             proposal, warm_settings, start, master.fork(kWarmup));
    start = warm.back().params;
  }

  FitResult out;
  out.start = start;
  const RngStream main_rng = master.fork(kMainChain);
  if (method == "approx")
    out.chain = run_observable_chain(dataset.obs, u, cfg.coarse_risk(), sites,
                                     prior, proposal, cfg.chain_settings(), start,
                                     main_rng, &out.diagnostics);
  else
    out.chain = run_latent_chain(dataset.obs, u, cfg.fine_risk(), sites, prior,
                                 proposal, cfg.chain_settings(), start, main_rng,
                                 &out.diagnostics);
  out.summary = summarize_chain(out.chain, cfg.inference.burn_in);
  return out;
}

namespace {

SummaryRow make_row(int rep, const std::string& method, const ChainSummary& s,
                    const ModelParams& truth) {
  SummaryRow row;
  row.repetition = rep;
  row.method = method;
  const double tv[3] = {truth.variogram.beta, truth.variogram.c, truth.alpha};
  for (int p = 0; p < 3; ++p) {
    row.est_mean.push_back(s.mean[p]);
    row.est_median.push_back(s.median[p]);
    const double em = s.mean[p] - tv[p];
    const double ed = s.median[p] - tv[p];
    row.sq_err_mean.push_back(em * em);
    row.sq_err_median.push_back(ed * ed);
  }
  return row;
}

SummaryRow failed_row(int rep, const std::string& method, const std::string& err) {
  SummaryRow row;
  row.repetition = rep;
  row.method = method;
  row.ok = false;
  row.error = err;
  return row;
}

}  // namespace

BenchmarkResult benchmark(const ExperimentConfig& cfg, const RngStream& master,
                          int n_threads) {
  cfg.validate();
  const int reps = cfg.benchmark.repetitions;
  const ModelParams truth = cfg.true_params();
  BenchmarkResult out;
  out.rows.resize(size_t(reps) * 2);

  auto run_rep = [&](int k) {
    const RngStream rep_rng = master.fork(k);
    Dataset d;
    try {
      d = generate_dataset(cfg, rep_rng.fork(0));
    } catch (const std::exception& e) {
      out.rows[2 * k] = failed_row(k, "conditional", e.what());
      out.rows[2 * k + 1] = failed_row(k, "approx", e.what());
      return;
    }
    const std::pair<std::string, std::uint64_t> runs[2] = {{"conditional", 1},
                                                           {"approx", 2}};
    for (int r = 0; r < 2; ++r) {
      try {
        const FitResult fr = fit(cfg, d, runs[r].first, rep_rng.fork(runs[r].second));
        out.rows[2 * k + r] = make_row(k, runs[r].first, fr.summary, truth);
      } catch (const std::exception& e) {
        out.rows[2 * k + r] = failed_row(k, runs[r].first, e.what());
      }
    }
  };

  if (n_threads <= 1) {
    for (int k = 0; k < reps; ++k) run_rep(k);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int k = next.fetch_add(1); k < reps; k = next.fetch_add(1)) run_rep(k);
    };
    std::vector<std::thread> pool;
    const int nt = std::min(n_threads, reps);
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  out.rmse.assign(out.methods.size(),
                  std::vector<std::vector<double>>(out.statistics.size(),
                                                   std::vector<double>(3, 0.0)));
  for (size_t mi = 0; mi < out.methods.size(); ++mi) {
    int n_ok = 0;
    std::vector<std::vector<double>> acc(2, std::vector<double>(3, 0.0));
    for (const SummaryRow& row : out.rows) {
      if (row.method != out.methods[mi] || !row.ok) continue;
      ++n_ok;
      for (int p = 0; p < 3; ++p) {
        acc[0][p] += row.sq_err_mean[p];
        acc[1][p] += row.sq_err_median[p];
      }
    }
    for (int si = 0; si < 2; ++si)
      for (int p = 0; p < 3; ++p)
        out.rmse[mi][si][p] = n_ok > 0 ? std::sqrt(acc[si][p] / n_ok)
                                       : std::numeric_limits<double>::quiet_NaN();
  }
  for (const SummaryRow& row : out.rows) (row.ok ? out.completed : out.failed)++;
  return out;
}

void write_benchmark_rows_csv(const BenchmarkResult& r, const std::string& path) {
  std::ofstream f = open_output(path);
  f << "repetition,method,ok,"
       "est_mean_beta,est_mean_c,est_mean_alpha,"
       "est_median_beta,est_median_c,est_median_alpha,"
       "sqerr_mean_beta,sqerr_mean_c,sqerr_mean_alpha,"
       "sqerr_median_beta,sqerr_median_c,sqerr_median_alpha,error\n";
  for (const SummaryRow& row : r.rows) {
    f << row.repetition << "," << row.method << "," << (row.ok ? 1 : 0);
    auto emit3 = [&](const std::vector<double>& v) {
      for (int p = 0; p < 3; ++p)
        f << "," << (row.ok ? format_double(v[p]) : std::string("NA"));
    };
    emit3(row.est_mean);
    emit3(row.est_median);
    emit3(row.sq_err_mean);
    emit3(row.sq_err_median);
    std::string err = row.error;
    std::replace(err.begin(), err.end(), ',', ';');
    f << "," << err << "\n";
  }
}

void write_rmse_csv(const BenchmarkResult& r, const std::string& path) {
  std::ofstream f = open_output(path);
  f << "method,statistic,beta,c,alpha\n";
  for (size_t mi = 0; mi < r.methods.size(); ++mi)
    for (size_t si = 0; si < r.statistics.size(); ++si)
      f << r.methods[mi] << "," << r.statistics[si] << ","
        << format_double(r.rmse[mi][si][0]) << ","
        << format_double(r.rmse[mi][si][1]) << ","
        << format_double(r.rmse[mi][si][2]) << "\n";
}

void write_metadata(const ExperimentConfig& cfg, const std::string& command,
                    const std::string& path) {
  json j;
  j["tool"] = "rpareto";
  j["command"] = command;
  j["config"] = config_to_json(cfg);
  std::ofstream f = open_output(path);
  f << j.dump(2) << "\n";
}

}  // namespace rpareto
