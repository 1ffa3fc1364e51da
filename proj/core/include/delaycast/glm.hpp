#pragma once

#include <Eigen/Dense>
#include <limits>

#include "delaycast/design.hpp"

namespace delaycast {

enum class Family { poisson, negbin, logistic };

struct FitResult {
    Eigen::VectorXd coefficients;
    // NB only. Capped at GlmOptions::phi_cap when the data are equidispersed.
    double dispersion = std::numeric_limits<double>::quiet_NaN();
    bool dispersion_capped = false;
    double loglik = 0.0;
    Eigen::MatrixXd fisher_information;
    bool converged = false;
    int iterations = 0;
};

struct GlmOptions {
    double rel_tol = 1e-10;   // relative log-likelihood change
    double grad_tol = 1e-8;   // score sup-norm
    int max_iter = 200;
    int max_halvings = 20;
    double phi_cap = 1e8;     // "Poisson limit" for the NB dispersion
    double fixed_phi = 0.0;   // > 0: hold the NB dispersion fixed

    // Warm starts (empty / nonpositive: use the built-in defaults).
    Eigen::VectorXd beta_init;
    double phi_init = 0.0;
};

// Weighted log-link Poisson MLE via Newton/IRLS with step-halving.
// Responses may be fractional. Throws on rank deficiency or invalid input.
FitResult fit_weighted_poisson(const DesignMatrix& design,
                               const Eigen::VectorXd& y,
                               const GlmOptions& opts = {});

// Weighted log-link negative binomial (mean mu, variance mu + mu^2/phi).
// Alternates IRLS steps for the coefficients with Newton steps for log(phi)
// on the profile likelihood.
FitResult fit_weighted_negbin(const DesignMatrix& design,
                              const Eigen::VectorXd& y,
                              const GlmOptions& opts = {});

// Weighted logit-link binomial MLE with fractional successes and trials.
// Throws on complete separation, reporting the offending direction.
FitResult fit_weighted_logistic(const DesignMatrix& design,
                                const Eigen::VectorXd& successes,
                                const Eigen::VectorXd& trials,
                                const GlmOptions& opts = {});

// Log-likelihood at an arbitrary parameter point, factorial/binomial
// constants dropped. For negbin, params = (beta..., log phi); for logistic,
// y holds successes and trials must be supplied.
double glm_loglik(Family family, const DesignMatrix& design,
                  const Eigen::VectorXd& y, const Eigen::VectorXd& trials,
                  const Eigen::VectorXd& params);

Eigen::VectorXd glm_score(Family family, const DesignMatrix& design,
                          const Eigen::VectorXd& y,
                          const Eigen::VectorXd& trials,
                          const Eigen::VectorXd& params);

// Columns identifiable from the data: the intercept (column 0) plus every
// column with variation across rows. Dummy columns for levels absent from
// the data window come back excluded; their coefficients stay at zero.
std::vector<int> identifiable_columns(const Eigen::MatrixXd& X);

// Max over coordinates of |analytic score - central finite difference|
// / (1 + |analytic score|), with step 1e-6 scaled by parameter magnitude.
double check_gradient(Family family, const DesignMatrix& design,
                      const Eigen::VectorXd& y, const Eigen::VectorXd& trials,
                      const Eigen::VectorXd& params);

}  // namespace delaycast
