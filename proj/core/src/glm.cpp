#include "delaycast/glm.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace delaycast {

namespace {

double log1pexp(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

void validate_design(const DesignMatrix& design, const Eigen::VectorXd& y) {
    Eigen::Index n = design.X.rows();
    if (y.size() != n)
        throw std::invalid_argument("response length does not match design rows");
    if (design.offset.size() && design.offset.size() != n)
        throw std::invalid_argument("offset length does not match design rows");
    if (design.weight.size() && design.weight.size() != n)
        throw std::invalid_argument("weight length does not match design rows");
    if (!design.X.allFinite()) throw std::invalid_argument("non-finite design entry");
    for (Eigen::Index i = 0; i < n; ++i) {
        double w = design.weight_at(i);
        if (!std::isfinite(w) || w < 0.0)
            throw std::invalid_argument("weights must be finite and nonnegative");
    }
    if (design.offset.size() && !design.offset.allFinite())
        throw std::invalid_argument("non-finite offset entry");
    if (!y.allFinite()) throw std::invalid_argument("non-finite response");
}

void check_rank(const DesignMatrix& design) {
    Eigen::Index n = design.X.rows(), p = design.X.cols();
    Eigen::MatrixXd Xw(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        Xw.row(i) = design.X.row(i) * std::sqrt(design.weight_at(i));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        std::ostringstream msg;
        msg << "design matrix is rank deficient on rows with positive weight"
            << " (rank " << qr.rank() << " of " << p << ")";
        throw std::runtime_error(msg.str());
    }
}

Eigen::VectorXd linear_predictor(const DesignMatrix& design,
                                 const Eigen::VectorXd& beta) {
    Eigen::VectorXd eta = design.X * beta;
    if (design.offset.size()) eta += design.offset;
    return eta;
}

double poisson_loglik(const DesignMatrix& design, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& beta) {
    Eigen::VectorXd eta = linear_predictor(design, beta);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double w = design.weight_at(i);
        if (w == 0.0) continue;
        ll += w * (y[i] * eta[i] - std::exp(eta[i]));
    }
    return ll;
}

Eigen::VectorXd poisson_score(const DesignMatrix& design,
                              const Eigen::VectorXd& y,
                              const Eigen::VectorXd& beta) {
    Eigen::VectorXd eta = linear_predictor(design, beta);
    Eigen::VectorXd r(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        r[i] = design.weight_at(i) * (y[i] - std::exp(eta[i]));
    return design.X.transpose() * r;
}

// NB log-likelihood with dispersion phi; constants in y alone are kept so
// the profile in phi is exact (they cancel in Poisson/NB comparisons of fit).
double negbin_loglik_full(const DesignMatrix& design, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& beta, double phi) {
    Eigen::VectorXd eta = linear_predictor(design, beta);
    double logphi = std::log(phi);
    double lgphi = std::lgamma(phi);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double w = design.weight_at(i);
        if (w == 0.0) continue;
        double mu = std::exp(eta[i]);
        ll += w * (std::lgamma(y[i] + phi) - lgphi - std::lgamma(y[i] + 1.0) +
                   phi * logphi + y[i] * eta[i] -
                   (phi + y[i]) * std::log(phi + mu));
    }
    return ll;
}

double logistic_loglik(const DesignMatrix& design, const Eigen::VectorXd& s,
                       const Eigen::VectorXd& n, const Eigen::VectorXd& gamma) {
    Eigen::VectorXd eta = linear_predictor(design, gamma);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double w = design.weight_at(i);
        if (w == 0.0) continue;
        ll += w * (s[i] * eta[i] - n[i] * log1pexp(eta[i]));
    }
    return ll;
}

Eigen::VectorXd logistic_score(const DesignMatrix& design,
                               const Eigen::VectorXd& s,
                               const Eigen::VectorXd& n,
                               const Eigen::VectorXd& gamma) {
    Eigen::VectorXd eta = linear_predictor(design, gamma);
    Eigen::VectorXd r(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        r[i] = design.weight_at(i) * (s[i] - n[i] * sigmoid(eta[i]));
    return design.X.transpose() * r;
}

// Generic damped Newton ascent with step-halving.
// eval(beta) -> loglik, score(beta), hessian_weights(beta) -> W such that
// H = X' diag(W) X.
template <typename LoglikFn, typename ScoreFn, typename WeightFn>
bool newton_irls(const DesignMatrix& design, Eigen::VectorXd& beta,
                 double& ll, LoglikFn loglik, ScoreFn score, WeightFn weights,
                 const GlmOptions& opts, int& iterations) {
    ll = loglik(beta);
    if (!std::isfinite(ll))
        throw std::runtime_error("log-likelihood not finite at start");
    for (iterations = 1; iterations <= opts.max_iter; ++iterations) {
        Eigen::VectorXd g = score(beta);
        Eigen::VectorXd w = weights(beta);
        Eigen::MatrixXd H =
            design.X.transpose() * w.asDiagonal() * design.X;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        Eigen::VectorXd step = ldlt.solve(g);
        if (!step.allFinite())
            throw std::runtime_error("Newton step failed (singular information)");
        double scale = 1.0;
        double new_ll = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd cand;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            cand = beta + scale * step;
            new_ll = loglik(cand);
            if (std::isfinite(new_ll) && new_ll >= ll - 1e-14 * std::abs(ll)) break;
            scale *= 0.5;
        }
        double rel_change = std::abs(new_ll - ll) / (1.0 + std::abs(new_ll));
        beta = cand;
        ll = new_ll;
        if (rel_change < opts.rel_tol &&
            score(beta).template lpNorm<Eigen::Infinity>() < opts.grad_tol)
            return true;
    }
    return false;
}

}  // namespace

FitResult fit_weighted_poisson(const DesignMatrix& design,
                               const Eigen::VectorXd& y,
                               const GlmOptions& opts) {
    validate_design(design, y);
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] < 0) throw std::invalid_argument("negative Poisson response");
    check_rank(design);

    Eigen::Index p = design.X.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    // Start the intercept near the weighted mean rate if column 0 is constant.
    double sw = 0, sy = 0, se = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double w = design.weight_at(i);
        sw += w;
        sy += w * y[i];
        se += w * std::exp(design.offset_at(i));
    }
    if (sw > 0 && sy > 0 && (design.X.col(0).array() == 1.0).all())
        beta[0] = std::log(sy / se);
    if (opts.beta_init.size() == p) beta = opts.beta_init;

    FitResult res;
    auto ll_fn = [&](const Eigen::VectorXd& b) {
        return poisson_loglik(design, y, b);
    };
    auto score_fn = [&](const Eigen::VectorXd& b) {
        return poisson_score(design, y, b);
    };
    auto weight_fn = [&](const Eigen::VectorXd& b) {
        Eigen::VectorXd eta = linear_predictor(design, b);
        Eigen::VectorXd w(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i)
            w[i] = design.weight_at(i) * std::exp(eta[i]);
        return w;
    };
    res.converged = newton_irls(design, beta, res.loglik, ll_fn, score_fn,
                                weight_fn, opts, res.iterations);
    res.coefficients = beta;
    Eigen::VectorXd w = weight_fn(beta);
    res.fisher_information = design.X.transpose() * w.asDiagonal() * design.X;
    return res;
}

FitResult fit_weighted_logistic(const DesignMatrix& design,
                                const Eigen::VectorXd& successes,
                                const Eigen::VectorXd& trials,
                                const GlmOptions& opts) {
    validate_design(design, successes);
    if (trials.size() != successes.size())
        throw std::invalid_argument("trials length does not match successes");
    for (Eigen::Index i = 0; i < trials.size(); ++i) {
        if (!(trials[i] >= 0) || successes[i] < 0 || successes[i] > trials[i])
            throw std::invalid_argument(
                "need 0 <= successes <= trials on every row");
    }
    check_rank(design);

    Eigen::Index p = design.X.cols();
    Eigen::VectorXd gamma = opts.beta_init.size() == p
                                ? opts.beta_init
                                : Eigen::VectorXd::Zero(p);
    FitResult res;
    auto ll_fn = [&](const Eigen::VectorXd& g) {
        return logistic_loglik(design, successes, trials, g);
    };
    auto score_fn = [&](const Eigen::VectorXd& g) {
        return logistic_score(design, successes, trials, g);
    };
    auto weight_fn = [&](const Eigen::VectorXd& g) {
        Eigen::VectorXd eta = linear_predictor(design, g);
        Eigen::VectorXd w(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            double mu = sigmoid(eta[i]);
            // floor keeps the information matrix invertible near separation
            w[i] = design.weight_at(i) * trials[i] * std::max(mu * (1 - mu), 1e-12);
        }
        return w;
    };
    res.converged = newton_irls(design, gamma, res.loglik, ll_fn, score_fn,
                                weight_fn, opts, res.iterations);
    // On separated data the score decays like e^{-|eta|}, so the loop can
    // "converge" while the MLE sits at infinity; predictors that push the
    // fitted probabilities to numerical 0/1 are the symptom.
    // A row drives the MLE to infinity only when it is exactly one-sided:
    // runaway eta with a tiny-but-positive success fraction is a legitimate
    // finite optimum (EM expected counts produce such rows routinely).
    Eigen::VectorXd eta_fit = linear_predictor(design, gamma);
    bool runaway = false;
    for (Eigen::Index i = 0; i < eta_fit.size(); ++i) {
        if (design.weight_at(i) * trials[i] <= 1e-3) continue;
        if (eta_fit[i] < -20.0 && successes[i] <= 0.0) runaway = true;
        if (eta_fit[i] > 20.0 && successes[i] >= trials[i]) runaway = true;
    }
    if ((!res.converged && gamma.lpNorm<Eigen::Infinity>() > 30.0) || runaway) {
        std::ostringstream msg;
        msg << "complete separation suspected; offending direction (";
        Eigen::VectorXd dir = gamma.normalized();
        for (Eigen::Index j = 0; j < p; ++j)
            msg << (j ? ", " : "") << dir[j];
        msg << ")";
        throw std::runtime_error(msg.str());
    }
    res.coefficients = gamma;
    Eigen::VectorXd w = weight_fn(gamma);
    res.fisher_information = design.X.transpose() * w.asDiagonal() * design.X;
    return res;
}

namespace {

// d/d(log phi) and d^2/d(log phi)^2 of the weighted NB log-likelihood.
void negbin_phi_derivs(const DesignMatrix& design, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double logphi,
                       double& d1, double& d2) {
    double phi = std::exp(logphi);
    Eigen::VectorXd eta = linear_predictor(design, beta);
    double g = 0.0, h = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double w = design.weight_at(i);
        if (w == 0.0) continue;
        double mu = std::exp(eta[i]);
        double dphi = boost::math::digamma(y[i] + phi) -
                      boost::math::digamma(phi) + std::log(phi) + 1.0 -
                      std::log(phi + mu) - (phi + y[i]) / (phi + mu);
        double d2phi = boost::math::trigamma(y[i] + phi) -
                       boost::math::trigamma(phi) + 1.0 / phi -
                       2.0 / (phi + mu) + (phi + y[i]) / ((phi + mu) * (phi + mu));
        g += w * dphi;
        h += w * d2phi;
    }
    d1 = phi * g;
    d2 = phi * phi * h + phi * g;
}

}  // namespace

FitResult fit_weighted_negbin(const DesignMatrix& design,
                              const Eigen::VectorXd& y,
                              const GlmOptions& opts) {
    validate_design(design, y);
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] < 0) throw std::invalid_argument("negative NB response");
    check_rank(design);

    Eigen::Index p = design.X.cols();

    Eigen::VectorXd beta;
    if (opts.beta_init.size() == p) {
        beta = opts.beta_init;
    } else {
        // Poisson start for the coefficients.
        GlmOptions pois_opts = opts;
        pois_opts.beta_init.resize(0);
        beta = fit_weighted_poisson(design, y, pois_opts).coefficients;
    }

    double logphi;
    bool estimate_phi = opts.fixed_phi <= 0.0;
    if (!estimate_phi) {
        logphi = std::log(opts.fixed_phi);
    } else if (opts.phi_init > 0.0) {
        logphi = std::log(std::min(opts.phi_init, opts.phi_cap));
    } else {
        // Moment start: phi = mu^2 / (var - mu) from Pearson residuals.
        Eigen::VectorXd eta = linear_predictor(design, beta);
        double num = 0.0, den = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            double w = design.weight_at(i);
            double mu = std::exp(eta[i]);
            double r = y[i] - mu;
            num += w * mu * mu;
            den += w * (r * r - mu);
        }
        double phi0 = den > 0 ? num / den : opts.phi_cap;
        logphi = std::log(std::clamp(phi0, 1e-4, opts.phi_cap));
    }

    FitResult res;
    auto ll = [&](const Eigen::VectorXd& b, double lp) {
        return negbin_loglik_full(design, y, b, std::exp(lp));
    };
    double cur = ll(beta, logphi);
    const double logcap = std::log(opts.phi_cap);

    for (res.iterations = 1; res.iterations <= opts.max_iter; ++res.iterations) {
        double phi = std::exp(logphi);
        // beta step: Newton with NB working weights.
        Eigen::VectorXd eta = linear_predictor(design, beta);
        Eigen::VectorXd r(eta.size()), w(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            double mu = std::exp(eta[i]);
            double wi = design.weight_at(i);
            r[i] = wi * phi * (y[i] - mu) / (phi + mu);
            w[i] = wi * mu * phi / (phi + mu);
        }
        Eigen::VectorXd g = design.X.transpose() * r;
        Eigen::MatrixXd H = design.X.transpose() * w.asDiagonal() * design.X;
        Eigen::VectorXd step = Eigen::LDLT<Eigen::MatrixXd>(H).solve(g);
        double scale = 1.0, next = cur;
        Eigen::VectorXd cand = beta;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            cand = beta + scale * step;
            next = ll(cand, logphi);
            if (std::isfinite(next) && next >= cur - 1e-14 * std::abs(cur)) break;
            scale *= 0.5;
        }
        beta = cand;
        cur = next;

        // phi step: damped Newton on log phi.
        double d1 = 0.0;
        if (estimate_phi) {
            double d2;
            negbin_phi_derivs(design, y, beta, logphi, d1, d2);
            double pstep = d2 < 0 ? -d1 / d2 : (d1 > 0 ? 1.0 : -1.0);
            pstep = std::clamp(pstep, -2.0, 2.0);
            double sscale = 1.0;
            for (int h = 0; h <= opts.max_halvings; ++h) {
                double cand_lp = std::min(logphi + sscale * pstep, logcap);
                double trial = ll(beta, cand_lp);
                if (std::isfinite(trial) && trial >= cur - 1e-14 * std::abs(cur)) {
                    logphi = cand_lp;
                    cur = trial;
                    break;
                }
                sscale *= 0.5;
            }
        }

        // joint convergence: coefficient score and phi score.
        Eigen::VectorXd eta2 = linear_predictor(design, beta);
        double phi2 = std::exp(logphi);
        Eigen::VectorXd r2(eta2.size());
        for (Eigen::Index i = 0; i < eta2.size(); ++i) {
            double mu = std::exp(eta2[i]);
            r2[i] = design.weight_at(i) * phi2 * (y[i] - mu) / (phi2 + mu);
        }
        double gnorm = (design.X.transpose() * r2).lpNorm<Eigen::Infinity>();
        double pgrad = 0.0;
        if (estimate_phi && logphi < logcap) {
            double d2u;
            negbin_phi_derivs(design, y, beta, logphi, pgrad, d2u);
        }
        if (gnorm < opts.grad_tol && std::abs(pgrad) < opts.grad_tol) {
            res.converged = true;
            break;
        }
    }

    double phi = std::exp(logphi);
    res.coefficients = beta;
    res.dispersion = phi;
    res.dispersion_capped = estimate_phi && logphi >= logcap - 1e-12;
    res.loglik = cur;

    // Expected information: block-diagonal in (beta, log phi).
    Eigen::VectorXd eta = linear_predictor(design, beta);
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        w[i] = design.weight_at(i) * std::exp(eta[i]) * phi /
               (phi + std::exp(eta[i]));
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p + 1, p + 1);
    info.topLeftCorner(p, p) =
        design.X.transpose() * w.asDiagonal() * design.X;
    double d1, d2;
    negbin_phi_derivs(design, y, beta, logphi, d1, d2);
    info(p, p) = std::max(-d2, 0.0);
    res.fisher_information = info;
    return res;
}

double glm_loglik(Family family, const DesignMatrix& design,
                  const Eigen::VectorXd& y, const Eigen::VectorXd& trials,
                  const Eigen::VectorXd& params) {
    switch (family) {
        case Family::poisson:
            return poisson_loglik(design, y, params);
        case Family::negbin: {
            Eigen::VectorXd beta = params.head(params.size() - 1);
            return negbin_loglik_full(design, y, beta,
                                      std::exp(params[params.size() - 1]));
        }
        case Family::logistic:
            return logistic_loglik(design, y, trials, params);
    }
    throw std::logic_error("unknown family");
}

Eigen::VectorXd glm_score(Family family, const DesignMatrix& design,
                          const Eigen::VectorXd& y,
                          const Eigen::VectorXd& trials,
                          const Eigen::VectorXd& params) {
    switch (family) {
        case Family::poisson:
            return poisson_score(design, y, params);
        case Family::negbin: {
            Eigen::Index p = params.size() - 1;
            Eigen::VectorXd beta = params.head(p);
            double phi = std::exp(params[p]);
            Eigen::VectorXd eta = linear_predictor(design, beta);
            Eigen::VectorXd r(eta.size());
            for (Eigen::Index i = 0; i < eta.size(); ++i) {
                double mu = std::exp(eta[i]);
                r[i] = design.weight_at(i) * phi * (y[i] - mu) / (phi + mu);
            }
            Eigen::VectorXd g(p + 1);
            g.head(p) = design.X.transpose() * r;
            double d1, d2;
            negbin_phi_derivs(design, y, beta, params[p], d1, d2);
            g[p] = d1;
            return g;
        }
        case Family::logistic:
            return logistic_score(design, y, trials, params);
    }
    throw std::logic_error("unknown family");
}

double check_gradient(Family family, const DesignMatrix& design,
                      const Eigen::VectorXd& y, const Eigen::VectorXd& trials,
                      const Eigen::VectorXd& params) {
    Eigen::VectorXd analytic = glm_score(family, design, y, trials, params);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < params.size(); ++j) {
        double h = 1e-6 * std::max(1.0, std::abs(params[j]));
        Eigen::VectorXd up = params, dn = params;
        up[j] += h;
        dn[j] -= h;
        double fd = (glm_loglik(family, design, y, trials, up) -
                     glm_loglik(family, design, y, trials, dn)) /
                    (2.0 * h);
        worst = std::max(worst,
                         std::abs(analytic[j] - fd) / (1.0 + std::abs(analytic[j])));
    }
    return worst;
}

std::vector<int> identifiable_columns(const Eigen::MatrixXd& X) {
    std::vector<int> cols;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (j == 0 || X.col(j).maxCoeff() - X.col(j).minCoeff() > 0.0)
            cols.push_back(static_cast<int>(j));
    }
    return cols;
}

}  // namespace delaycast
