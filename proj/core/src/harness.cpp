#include "acss/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "acss/models.hpp"

namespace acss {

std::string to_string(ExperimentKind e) {
  switch (e) {
    case ExperimentKind::LogisticCi: return "logistic-ci";
    case ExperimentKind::BehrensFisher: return "behrens-fisher";
    case ExperimentKind::Spatial: return "spatial";
    case ExperimentKind::Mvt: return "mvt";
  }
  return "?";
}

ExperimentKind parse_experiment(const std::string& s) {
  for (auto e : {ExperimentKind::LogisticCi, ExperimentKind::BehrensFisher,
                 ExperimentKind::Spatial, ExperimentKind::Mvt})
    if (s == to_string(e)) return e;
  throw ConfigError("unknown experiment '" + s + "'");
}

namespace {

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> v;
  const int k = static_cast<int>(std::lround((hi - lo) / step));
  for (int i = 0; i <= k; ++i) v.push_back(std::round((lo + i * step) * 1e12) / 1e12);
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("config: bad value for '" + key + "': '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigError("");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad value for '" + key + "': '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad value for '" + key + "': '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

ExperimentConfig default_config(ExperimentKind e) {
  ExperimentConfig c;
  c.experiment = e;
  c.reps = 500;
  switch (e) {
    case ExperimentKind::LogisticCi:
      c.signals = grid(0.0, 1.0, 0.1);
      c.sigma2 = 10.0;
      c.m = 500;
      break;
    case ExperimentKind::BehrensFisher:
      c.signals = grid(0.0, 1.0, 0.1);
      c.sigma2 = 1.0;
      c.m = 500;
      break;
    case ExperimentKind::Spatial:
      c.signals = grid(0.0, 3.0, 0.5);
      c.sigma2 = 1.0;
      c.m = 100;
      break;
    case ExperimentKind::Mvt:
      c.signals = {2, 4, 6, 8, 10};
      c.sigma2 = 1.0;
      c.m = 100;
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (signals.empty()) throw ConfigError("config: signals must be nonempty");
  if (reps < 1) throw ConfigError("config: reps must be >= 1");
  if (m < 0) throw ConfigError("config: M must be >= 0");
  if (!(sigma2 > 0.0)) throw ConfigError("config: sigma2 must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: alpha must be in (0, 1)");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  if (!(radius_scale > 0.0)) throw ConfigError("config: radius_scale must be positive");
  if (fixed_L && *fixed_L < 0) throw ConfigError("config: L must be >= 0");
  if (fixed_s && *fixed_s < 1) throw ConfigError("config: s must be >= 1");
  if (fixed_rho && !(*fixed_rho > 0.0 && *fixed_rho < 1.0))
    throw ConfigError("config: rho must be in (0, 1)");
  if (topology == Topology::Iid) throw ConfigError("config: iid topology needs an exact sampler");
  if (n < 2 || covariates < 1 || n0 < 1 || n1 < 1 || side < 2)
    throw ConfigError("config: problem sizes out of range");
  if (experiment == ExperimentKind::Mvt)
    for (double s : signals)
      if (!(s > 0.0)) throw ConfigError("config: mvt signals are degrees of freedom (> 0)");
}

ExperimentConfig parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  auto exp_it = std::find_if(kv.begin(), kv.end(), [](auto& p) { return p.first == "experiment"; });
  if (exp_it == kv.end()) throw ConfigError("config: missing 'experiment'");
  ExperimentConfig c = default_config(parse_experiment(exp_it->second));

  for (const auto& [k, v] : kv) {
    if (k == "experiment") continue;
    if (k == "signals") {
      c.signals.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) c.signals.push_back(parse_double(k, trim(item)));
    } else if (k == "reps") c.reps = parse_number<int>(k, v);
    else if (k == "M" || k == "m") c.m = parse_number<int>(k, v);
    else if (k == "sigma2") c.sigma2 = parse_double(k, v);
    else if (k == "topology") c.topology = parse_topology(v);
    else if (k == "alpha") c.alpha = parse_double(k, v);
    else if (k == "seed") c.seed = parse_number<std::uint64_t>(k, v);
    else if (k == "threads") c.threads = parse_number<int>(k, v);
    else if (k == "out") c.out_path = v;
    else if (k == "L") {
      if (v == "auto") c.fixed_L.reset();
      else c.fixed_L = parse_number<int>(k, v);
    } else if (k == "s") c.fixed_s = parse_number<Eigen::Index>(k, v);
    else if (k == "rho") c.fixed_rho = parse_double(k, v);
    else if (k == "subset_tuning_reps") c.subset_tuning_reps = parse_number<int>(k, v);
    else if (k == "rho_tuning_reps") c.rho_tuning_reps = parse_number<int>(k, v);
    else if (k == "max_iter") c.max_iter = parse_number<int>(k, v);
    else if (k == "radius_scale") c.radius_scale = parse_double(k, v);
    else if (k == "record_runtime") c.record_runtime = parse_bool(k, v);
    else if (k == "n") c.n = parse_number<int>(k, v);
    else if (k == "covariates") c.covariates = parse_number<int>(k, v);
    else if (k == "n0") c.n0 = parse_number<int>(k, v);
    else if (k == "n1") c.n1 = parse_number<int>(k, v);
    else if (k == "side") c.side = parse_number<int>(k, v);
    else throw ConfigError("config: unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "experiment = " << to_string(c.experiment) << "\nsignals = ";
  for (std::size_t i = 0; i < c.signals.size(); ++i) o << (i ? ", " : "") << fmt(c.signals[i]);
  o << "\nreps = " << c.reps << "\nM = " << c.m << "\nsigma2 = " << fmt(c.sigma2)
    << "\ntopology = " << to_string(c.topology) << "\nalpha = " << fmt(c.alpha)
    << "\nseed = " << c.seed << "\nthreads = " << c.threads << "\nL = "
    << (c.fixed_L ? std::to_string(*c.fixed_L) : "auto") << '\n';
  if (c.fixed_s) o << "s = " << *c.fixed_s << '\n';
  if (c.fixed_rho) o << "rho = " << fmt(*c.fixed_rho) << '\n';
  o << "subset_tuning_reps = " << c.subset_tuning_reps
    << "\nrho_tuning_reps = " << c.rho_tuning_reps << "\nmax_iter = " << c.max_iter
    << "\nradius_scale = " << fmt(c.radius_scale) << '\n';
  if (!c.out_path.empty()) o << "out = " << c.out_path << '\n';
  return o.str();
}

// ---------------------------------------------------------------------------

struct Experiment::Impl {
  // spatial
  std::shared_ptr<const SpatialModel> lattice;
  std::vector<Mat> alt_factors;
  std::shared_ptr<const TestStatistic> anisotropy;
  // behrens-fisher / mvt share the model across replications
  std::shared_ptr<const Model> fixed_model;
  std::shared_ptr<const TestStatistic> fixed_statistic;
  std::vector<std::shared_ptr<const MultivariateTModel>> mvt_truth;
};

Experiment::~Experiment() = default;
Experiment::Experiment(Experiment&&) noexcept = default;

namespace {

const double kLogisticTheta = 0.2;
const double kLogisticBeta = 0.1;
const double kSpatialTheta = 0.25;
const double kBfGamma0 = 1.0, kBfGamma1 = 2.0;
const double kMvtNullDof = 2.0;

Mat mvt_precision() {
  Mat t(2, 2);
  t << 1.0, -0.5, -0.5, 2.0;
  return t;
}

}  // namespace

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
  cfg_.validate();
  switch (cfg_.experiment) {
    case ExperimentKind::LogisticCi: break;
    case ExperimentKind::BehrensFisher:
      impl_->fixed_model = std::make_shared<BehrensFisherModel>(cfg_.n0, cfg_.n1);
      impl_->fixed_statistic = std::make_shared<MeanDifferenceStatistic>(cfg_.n0, cfg_.n1);
      break;
    case ExperimentKind::Spatial: {
      impl_->lattice = std::make_shared<SpatialModel>(SpatialModel::lattice(cfg_.side, 2));
      impl_->anisotropy = std::make_shared<AnisotropyStatistic>(cfg_.side);
      const Mat z = SpatialModel::lattice_coordinates(cfg_.side, 2);
      const Eigen::Index n = z.rows();
      for (double c : cfg_.signals) {
        Mat sigma(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = 0; j < n; ++j) {
            const double da = z(i, 0) - z(j, 0);
            const double db = (1.0 + c) * (z(i, 1) - z(j, 1));
            sigma(i, j) = std::exp(-kSpatialTheta * std::sqrt(da * da + db * db));
          }
        Eigen::LLT<Mat> llt(sigma);
        if (llt.info() != Eigen::Success)
          throw NumericalError("spatial: alternative covariance not positive definite");
        impl_->alt_factors.emplace_back(llt.matrixL());
      }
      break;
    }
    case ExperimentKind::Mvt:
      impl_->fixed_model = std::make_shared<MultivariateTModel>(cfg_.n, 2, kMvtNullDof);
      impl_->fixed_statistic = std::make_shared<TailRatioStatistic>();
      for (double dof : cfg_.signals)
        impl_->mvt_truth.push_back(std::make_shared<MultivariateTModel>(cfg_.n, 2, dof));
      break;
  }
}

AcssConfig Experiment::acss_config() const {
  AcssConfig a;
  a.sigma = std::sqrt(cfg_.sigma2);
  a.max_iter = cfg_.max_iter;
  a.radius_scale = cfg_.radius_scale;
  return a;
}

RunOptions Experiment::run_options() const {
  RunOptions o;
  o.m = cfg_.m;
  o.topology = cfg_.topology;
  o.subset_tuning_reps = cfg_.subset_tuning_reps;
  o.rho_tuning_reps = cfg_.rho_tuning_reps;
  if (cfg_.fixed_L) {
    ProposalConfig p;
    const bool ar = cfg_.experiment == ExperimentKind::Spatial;
    p.family = ar ? ProposalFamily::ArMixing : ProposalFamily::SubsetResample;
    p.L = *cfg_.fixed_L;
    p.s = cfg_.fixed_s.value_or(1);
    p.rho = cfg_.fixed_rho.value_or(0.9);
    o.proposal = p;
  }
  return o;
}

Replication Experiment::generate(std::size_t signal_index, Rng& rng) const {
  const double signal = cfg_.signals.at(signal_index);
  Replication r;
  switch (cfg_.experiment) {
    case ExperimentKind::LogisticCi: {
      const Eigen::Index n = cfg_.n, d = cfg_.covariates;
      Mat z(n, d);
      for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < n; ++i) z(i, j) = rng.normal();
      auto model = std::make_shared<GlmModel>(z, GlmPartition::Logistic);
      r.oracle_theta = Vec::Constant(d, kLogisticTheta);
      r.x = model->sample_data(r.oracle_theta, rng);
      Vec y = signal * r.x.col() + z * Vec::Constant(d, kLogisticBeta);
      for (Eigen::Index i = 0; i < n; ++i) y[i] += rng.normal();
      r.statistic = std::make_shared<OlsCoefficientStatistic>(y, z);
      r.model = model;
      r.oracle_model = model;
      break;
    }
    case ExperimentKind::BehrensFisher: {
      Vec v(cfg_.n0 + cfg_.n1);
      for (int i = 0; i < cfg_.n0; ++i) v[i] = rng.normal(0.0, std::sqrt(kBfGamma0));
      for (int i = 0; i < cfg_.n1; ++i) v[cfg_.n0 + i] = rng.normal(signal, std::sqrt(kBfGamma1));
      r.x = Dataset::scalars(v);
      r.model = impl_->fixed_model;
      r.oracle_model = impl_->fixed_model;
      r.oracle_theta = Vec(3);
      r.oracle_theta << 0.0, kBfGamma0, kBfGamma1;
      r.statistic = impl_->fixed_statistic;
      break;
    }
    case ExperimentKind::Spatial: {
      const Mat& f = impl_->alt_factors.at(signal_index);
      r.x = Dataset::scalars(f * rng.normal_vector(f.rows()));
      r.model = impl_->lattice;
      r.oracle_model = impl_->lattice;
      r.oracle_theta = Vec::Constant(1, kSpatialTheta);
      r.statistic = impl_->anisotropy;
      break;
    }
    case ExperimentKind::Mvt: {
      const Vec theta0 = flatten_symmetric(mvt_precision());
      r.x = impl_->mvt_truth.at(signal_index)->sample_data(theta0, rng);
      r.model = impl_->fixed_model;
      r.oracle_model = impl_->fixed_model;
      r.oracle_theta = theta0;
      r.statistic = impl_->fixed_statistic;
      break;
    }
  }
  return r;
}

std::vector<ReplicationRecord> run_replication(const Experiment& exp, std::size_t signal_index,
                                               int rep) {
  const ExperimentConfig& cfg = exp.config();
  constexpr int kMaxAttempts = 20;
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t seed =
        derive_seed(cfg.seed, {static_cast<std::uint64_t>(cfg.experiment) + 1, signal_index,
                               static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(attempt)});
    try {
      Rng rng(seed);
      Rng data_rng = rng.split();
      Rng acss_rng = rng.split();
      Rng oracle_rng = rng.split();
      const Replication r = exp.generate(signal_index, data_rng);

      ReplicationRecord a{cfg.experiment, cfg.signals[signal_index], rep, "acss", 1.0, false,
                          seed, 0.0};
      const AcssResult res = run_acss(*r.model, zero_regularizer(), r.x, *r.statistic,
                                      exp.acss_config(), exp.run_options(), acss_rng);
      a.pvalue = res.pvalue;
      a.ssosp_ok = res.ssosp_ok;
      a.runtime_ms = cfg.record_runtime ? res.wall_ms : 0.0;

      ReplicationRecord o = a;
      o.method = "oracle";
      o.ssosp_ok = true;
      const auto t0 = std::chrono::steady_clock::now();
      o.pvalue = oracle_pvalue(*r.oracle_model, r.oracle_theta, r.x, *r.statistic, cfg.m,
                               oracle_rng);
      o.runtime_ms = cfg.record_runtime
                         ? std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count()
                         : 0.0;
      return {a, o};
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      std::cerr << "replication " << to_string(cfg.experiment) << " signal=" << fmt(cfg.signals[signal_index])
                << " rep=" << rep << " attempt=" << attempt << " failed: " << e.what()
                << "; regenerating\n";
      if (attempt + 1 >= kMaxAttempts) throw;
    }
  }
}

std::vector<ReplicationRecord> run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  const Experiment exp(cfg);
  const std::size_t total = cfg.signals.size() * static_cast<std::size_t>(cfg.reps);
  std::vector<std::vector<ReplicationRecord>> slots(total);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::size_t done = 0;
  std::mutex mu;
  std::exception_ptr error;

  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= total || stop) return;
      const std::size_t sig = t / static_cast<std::size_t>(cfg.reps);
      const int rep = static_cast<int>(t % static_cast<std::size_t>(cfg.reps));
      try {
        slots[t] = run_replication(exp, sig, rep);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        stop = true;
        return;
      }
      if (progress) {
        std::lock_guard lock(mu);
        progress(++done, total);
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(total)));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<ReplicationRecord> out;
  out.reserve(total * 2);
  for (auto& s : slots)
    for (auto& r : s) out.push_back(std::move(r));
  return out;
}

std::vector<PowerRow> summarize(const std::vector<ReplicationRecord>& records, double alpha) {
  std::map<std::tuple<int, double, std::string>, PowerRow> acc;
  std::map<std::tuple<int, double, std::string>, int> ssosp;
  for (const auto& r : records) {
    const auto key = std::make_tuple(static_cast<int>(r.experiment), r.signal, r.method);
    auto& row = acc[key];
    row.experiment = r.experiment;
    row.signal = r.signal;
    row.method = r.method;
    ++row.reps;
    if (r.pvalue <= alpha) ++row.rejections;
    if (r.ssosp_ok) ++ssosp[key];
  }
  std::vector<PowerRow> out;
  for (auto& [key, row] : acc) {
    row.rate = static_cast<double>(row.rejections) / row.reps;
    row.se = std::sqrt(row.rate * (1.0 - row.rate) / row.reps);
    row.ssosp_rate = static_cast<double>(ssosp[key]) / row.reps;
    out.push_back(row);
  }
  return out;
}

void write_csv(std::ostream& out, const std::vector<ReplicationRecord>& records) {
  out << "experiment,signal,rep,method,pvalue,ssosp_ok,seed,runtime_ms\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.3f", r.runtime_ms);
    out << to_string(r.experiment) << ',' << fmt(r.signal) << ',' << r.rep << ',' << r.method
        << ',' << fmt(r.pvalue) << ',' << (r.ssosp_ok ? 1 : 0) << ',' << r.seed << ',' << buf
        << '\n';
  }
}

std::vector<ReplicationRecord> read_csv(std::istream& in) {
  std::vector<ReplicationRecord> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 8) throw ConfigError("csv: expected 8 fields in '" + line + "'");
    ReplicationRecord r;
    r.experiment = parse_experiment(f[0]);
    r.signal = parse_double("signal", f[1]);
    r.rep = parse_number<int>("rep", f[2]);
    r.method = f[3];
    r.pvalue = parse_double("pvalue", f[4]);
    r.ssosp_ok = f[5] == "1";
    r.seed = parse_number<std::uint64_t>("seed", f[6]);
    r.runtime_ms = parse_double("runtime_ms", f[7]);
    out.push_back(r);
  }
  return out;
}

void write_power_table(std::ostream& out, const std::vector<PowerRow>& rows) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-15s %8s %-7s %5s %7s %7s %7s\n", "experiment", "signal",
                "method", "reps", "rate", "se", "ssosp");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-15s %8s %-7s %5d %7.3f %7.4f %7.3f\n",
                  to_string(r.experiment).c_str(), fmt(r.signal).c_str(), r.method.c_str(), r.reps,
                  r.rate, r.se, r.ssosp_rate);
    out << buf;
  }
}

}  // namespace acss
