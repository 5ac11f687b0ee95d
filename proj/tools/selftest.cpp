#include "selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "acss/acss.hpp"
#include "acss/models.hpp"

using namespace acss;

namespace {

struct Case {
  std::string name;
  std::shared_ptr<Model> model;
  ParamVector theta;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double rel_err(const Mat& a, const Mat& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Central differences of value -> gradient and of gradient -> Hessian.
std::pair<double, double> fd_errors(const Model& m, const ParamVector& theta, const Dataset& x) {
  const Derivatives d = m.bind(theta)->evaluate(x, 2);
  const Eigen::Index p = theta.size();
  Vec g(p);
  Mat h(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double step = 1e-5 * std::max(1.0, std::abs(theta[i]));
    ParamVector up = theta, dn = theta;
    up[i] += step;
    dn[i] -= step;
    const auto bu = m.bind(up), bd = m.bind(dn);
    g[i] = (bu->evaluate(x, 0).value - bd->evaluate(x, 0).value) / (2 * step);
    h.col(i) = (bu->evaluate(x, 1).grad - bd->evaluate(x, 1).grad) / (2 * step);
  }
  return {rel_err(d.grad, g), rel_err(d.hess, h)};
}

}  // namespace

int run_selftest(std::ostream& out) {
  int failures = 0;
  auto check = [&](const std::string& what, bool ok) {
    out << (ok ? "PASS " : "FAIL ") << what << '\n';
    if (!ok) ++failures;
  };

  Rng rng(7);
  Mat z(100, 5);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
  Mat prec(2, 2);
  prec << 1.0, -0.5, -0.5, 2.0;
  std::vector<Case> cases{
      {"gaussian-mean", std::make_shared<GaussianMeanModel>(20), Vec::Constant(1, 0.3)},
      {"logistic", std::make_shared<GlmModel>(z, GlmPartition::Logistic), Vec::Constant(5, 0.2)},
      {"behrens-fisher", std::make_shared<BehrensFisherModel>(50, 50), Vec{{0.1, 1.0, 2.0}}},
      {"spatial", std::make_shared<SpatialModel>(SpatialModel::lattice(6)), Vec::Constant(1, 0.25)},
      {"mvt", std::make_shared<MultivariateTModel>(100, 2, 2.0), flatten_symmetric(prec)},
  };
  for (const auto& c : cases) {
    double ge = 0, he = 0;
    for (int r = 0; r < 5; ++r) {
      const Dataset x = c.model->sample_data(c.theta, rng);
      const auto [g, h] = fd_errors(*c.model, c.theta, x);
      ge = std::max(ge, g);
      he = std::max(he, h);
    }
    check(c.name + " gradient vs finite differences (" + sci(ge) + ")", ge <= 1e-5);
    check(c.name + " Hessian vs finite differences (" + sci(he) + ")", he <= 1e-4);
  }

  {
    const GaussianMeanModel toy(4);
    Vec v(4);
    v << 0.0, 0.5, 1.5, 2.0;
    AcssConfig cfg;
    cfg.sigma = 2.0;
    const auto est = solve_perturbed(toy, zero_regularizer(), Dataset::scalars(v),
                                     Vec::Constant(1, 1.0), cfg);
    check("toy estimator closed form", est.is_ssosp && std::abs(est.theta_hat[0] - 0.5) < 1e-8);
  }
  {
    const std::vector<double> t{3, 6, 5, 2};
    check("p-value with ties", std::abs(compute_pvalue(5, t) - 0.6) < 1e-15);
  }
  {
    const auto [idx, flagged] = select_subset_size({1, 5, 10}, {0.9, 0.5, 0.1});
    check("subset size selection", idx == 1 && !flagged && subset_chain_length(100, 5, 0.5) == 80);
    check("mixing chain length", mixing_chain_length(0.9) == 200 && mixing_chain_length(-0.1) == 20);
  }
  {
    const GaussianMeanModel toy(10);
    const Dataset x = toy.sample_data(Vec::Constant(1, 0.0), rng);
    AcssConfig cfg;
    cfg.max_iter = 0;
    const ResidualKurtosisStatistic stat;
    RunOptions opts;
    opts.m = 20;
    opts.topology = Topology::Iid;
    const auto res = run_acss(toy, zero_regularizer(), x, stat, cfg, opts, rng);
    check("disabled solver gives p = 1", !res.ssosp_ok && res.pvalue == 1.0);
  }
  out << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures;
}
