#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace prefgp {

// Error taxonomy. Every failure the library raises derives from Error and
// carries a stable machine-readable code.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct InputError : Error {
    explicit InputError(const std::string& what) : Error("invalid_input", what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error("numerical", what) {}
};

struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double gradient_norm)
        : Error("convergence", what), gradient_norm(gradient_norm) {}
    double gradient_norm;
};

struct StateError : Error {
    explicit StateError(const std::string& what) : Error("state", what) {}
};

struct ExhaustedError : Error {
    explicit ExhaustedError(const std::string& what) : Error("finished", what) {}
};

/// Opaque item identifier. Candidates use non-negative ids; the two
/// reference points used for virtual comparisons have reserved negative ids.
struct ItemId {
    std::int64_t value = 0;

    constexpr auto operator<=>(const ItemId&) const = default;

    static constexpr ItemId nadir() { return ItemId{-1}; }
    static constexpr ItemId ideal() { return ItemId{-2}; }
    constexpr bool is_virtual() const { return value < 0; }
};

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A normalized objective-value vector (d >= 2, every component in [0,1]).
class PolicyValue {
public:
    PolicyValue() = default;
    explicit PolicyValue(Vector values) : values_(std::move(values)) { validate(); }
    PolicyValue(std::initializer_list<double> values)
        : values_(Eigen::Map<const Vector>(values.begin(), static_cast<Eigen::Index>(values.size()))) {
        validate();
    }

    static PolicyValue from(const std::vector<double>& v) {
        return PolicyValue(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    static PolicyValue constant(Eigen::Index d, double c) { return PolicyValue(Vector::Constant(d, c)); }

    const Vector& values() const { return values_; }
    Eigen::Index dims() const { return values_.size(); }
    double operator[](Eigen::Index i) const { return values_[i]; }
    std::vector<double> to_vector() const { return {values_.data(), values_.data() + values_.size()}; }

    bool operator==(const PolicyValue& o) const {
        return values_.size() == o.values_.size() && values_ == o.values_;
    }

private:
    void validate() const {
        if (values_.size() < 2) throw InputError("policy value needs at least 2 objectives");
        for (Eigen::Index i = 0; i < values_.size(); ++i) {
            const double v = values_[i];
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                throw InputError("policy value component " + std::to_string(i) + " = " +
                                 std::to_string(v) + " outside [0,1]");
        }
    }

    Vector values_;
};

}  // namespace prefgp

template <>
struct std::hash<prefgp::ItemId> {
    std::size_t operator()(const prefgp::ItemId& id) const noexcept {
        return std::hash<std::int64_t>{}(id.value);
    }
};
