#include "xprint/logistic.hpp"

#include <cmath>
#include <stdexcept>

namespace xprint {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
double softplus(double z) {
    if (z > 30.0) return z;
    return std::log1p(std::exp(z));
}

}  // namespace

double LogisticModel::loss(const std::vector<std::array<double, 3>>& x,
                           const std::vector<int>& y, const std::array<double, 3>& w,
                           double bias, double l2) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double z = bias;
        for (int k = 0; k < 3; ++k) z += w[k] * x[i][k];
        // cross-entropy: softplus(z) - y*z
        total += softplus(z) - (y[i] ? z : 0.0);
    }
    total /= static_cast<double>(x.size());
    double reg = 0.0;
    for (int k = 0; k < 3; ++k) reg += w[k] * w[k];
    return total + 0.5 * l2 * reg;
}

void LogisticModel::gradient(const std::vector<std::array<double, 3>>& x,
                             const std::vector<int>& y, const std::array<double, 3>& w,
                             double bias, double l2, std::array<double, 3>& grad_w,
                             double& grad_b) {
    grad_w = {0.0, 0.0, 0.0};
    grad_b = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double z = bias;
        for (int k = 0; k < 3; ++k) z += w[k] * x[i][k];
        const double err = sigmoid(z) - static_cast<double>(y[i]);
        for (int k = 0; k < 3; ++k) grad_w[k] += err * x[i][k];
        grad_b += err;
    }
    const auto n = static_cast<double>(x.size());
    for (int k = 0; k < 3; ++k) grad_w[k] = grad_w[k] / n + l2 * w[k];
    grad_b /= n;
}

LogisticModel LogisticModel::train(const std::vector<std::array<double, 3>>& x,
                                   const std::vector<int>& y, const LogisticHyper& hyper) {
    if (x.empty() || x.size() != y.size()) {
        throw std::invalid_argument("LogisticModel::train: bad inputs");
    }
    for (int v : y) {
        if (v != 0 && v != 1) {
            throw std::invalid_argument("LogisticModel::train: labels must be 0/1");
        }
    }
    LogisticModel model;
    model.hyper_ = hyper;
    double current = loss(x, y, model.w_, model.b_, hyper.l2);
    std::array<double, 3> grad_w;
    double grad_b = 0.0;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        gradient(x, y, model.w_, model.b_, hyper.l2, grad_w, grad_b);
        double step = hyper.learning_rate;
        while (step > 1e-12) {
            std::array<double, 3> w_try = model.w_;
            for (int k = 0; k < 3; ++k) w_try[k] -= step * grad_w[k];
            const double b_try = model.b_ - step * grad_b;
            const double trial = loss(x, y, w_try, b_try, hyper.l2);
            if (trial <= current) {
                model.w_ = w_try;
                model.b_ = b_try;
                current = trial;
                break;
            }
            step *= 0.5;
        }
    }
    return model;
}

double LogisticModel::predict(const std::array<double, 3>& h) const {
    double z = b_;
    for (int k = 0; k < 3; ++k) z += w_[k] * h[k];
    return sigmoid(z);
}

nlohmann::ordered_json LogisticModel::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = "logistic";
    j["weights"] = w_;
    j["bias"] = b_;
    j["learning_rate"] = hyper_.learning_rate;
    j["epochs"] = hyper_.epochs;
    j["l2"] = hyper_.l2;
    return j;
}

LogisticModel LogisticModel::from_json(const nlohmann::ordered_json& j) {
    if (j.at("kind").get<std::string>() != "logistic") {
        throw std::runtime_error("LogisticModel::from_json: wrong kind");
    }
    LogisticModel model;
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != 3) throw std::runtime_error("LogisticModel::from_json: bad weights");
    for (int k = 0; k < 3; ++k) model.w_[k] = w[k];
    model.b_ = j.at("bias").get<double>();
    model.hyper_.learning_rate = j.at("learning_rate").get<double>();
    model.hyper_.epochs = j.at("epochs").get<int>();
    model.hyper_.l2 = j.at("l2").get<double>();
    return model;
}

}  // namespace xprint
