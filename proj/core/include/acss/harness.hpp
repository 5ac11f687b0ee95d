#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "acss/acss.hpp"

namespace acss {

enum class ExperimentKind { LogisticCi, BehrensFisher, Spatial, Mvt };

std::string to_string(ExperimentKind e);
ExperimentKind parse_experiment(const std::string& s);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::LogisticCi;
  std::vector<double> signals;
  int reps = 200;
  int m = 100;
  double sigma2 = 1.0;
  Topology topology = Topology::HubAndSpoke;
  double alpha = 0.05;
  std::uint64_t seed = 20240101;
  int threads = 1;
  std::string out_path;

  // Proposal: tuned from theta-hat unless L is fixed here.
  std::optional<int> fixed_L;
  std::optional<Eigen::Index> fixed_s;
  std::optional<double> fixed_rho;
  int subset_tuning_reps = 100;
  int rho_tuning_reps = 500;
  int max_iter = 100;
  double radius_scale = 2.0;  // search ball radius = radius_scale * n^(-1/4)
  bool record_runtime = true;

  // Problem sizes.
  int n = 100;         // logistic-ci, mvt
  int covariates = 5;  // logistic-ci
  int n0 = 50, n1 = 50;
  int side = 10;       // spatial lattice side

  void validate() const;
};

/// Published defaults for one experiment (signal grid, sigma^2, M, reps = 500).
ExperimentConfig default_config(ExperimentKind e);

/// Flat "key = value" text with '#' comments. Throws ConfigError.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
std::string format_config(const ExperimentConfig& cfg);

/// Everything one replication needs: the null model for aCSS, the oracle's
/// simple null, the data, and the statistic.
struct Replication {
  std::shared_ptr<const Model> model;
  std::shared_ptr<const Model> oracle_model;
  ParamVector oracle_theta;
  Dataset x;
  std::shared_ptr<const TestStatistic> statistic;
};

/// Shared, read-only resources for one experiment (lattices, alternative
/// covariance factors) plus the data generator.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);
  ~Experiment();
  Experiment(Experiment&&) noexcept;

  [[nodiscard]] const ExperimentConfig& config() const { return cfg_; }
  [[nodiscard]] AcssConfig acss_config() const;
  [[nodiscard]] RunOptions run_options() const;
  /// Data under the given signal level (the null at signal 0).
  [[nodiscard]] Replication generate(std::size_t signal_index, Rng& rng) const;

 private:
  struct Impl;
  ExperimentConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

struct ReplicationRecord {
  ExperimentKind experiment = ExperimentKind::LogisticCi;
  double signal = 0.0;
  int rep = 0;
  std::string method;  // "acss" or "oracle"
  double pvalue = 1.0;
  bool ssosp_ok = true;
  std::uint64_t seed = 0;
  double runtime_ms = 0.0;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// All signal levels x reps, aCSS and oracle per replication. Records come
/// back ordered by (signal, rep, method) whatever the thread count.
std::vector<ReplicationRecord> run_experiment(const ExperimentConfig& cfg,
                                              const ProgressFn& progress = {});

/// One replication, both methods. Failed data generation is retried with a
/// bumped sub-seed.
std::vector<ReplicationRecord> run_replication(const Experiment& exp, std::size_t signal_index,
                                               int rep);

struct PowerRow {
  ExperimentKind experiment = ExperimentKind::LogisticCi;
  double signal = 0.0;
  std::string method;
  int reps = 0;
  int rejections = 0;
  double rate = 0.0;
  double se = 0.0;
  double ssosp_rate = 1.0;
};

std::vector<PowerRow> summarize(const std::vector<ReplicationRecord>& records, double alpha);

void write_csv(std::ostream& out, const std::vector<ReplicationRecord>& records);
std::vector<ReplicationRecord> read_csv(std::istream& in);
void write_power_table(std::ostream& out, const std::vector<PowerRow>& rows);

}  // namespace acss
