#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqcpd {

/// Univariate time series, indexed from 1 (observation X_1 is the first value).
class Series {
public:
    Series() = default;

    explicit Series(std::vector<double> values) : values_(std::move(values)) {
        for (double v : values_) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("Series: values must be finite");
            }
        }
    }

    /// 1-based access; t must lie in [1, size()].
    double operator()(long t) const {
        if (t < 1 || t > static_cast<long>(values_.size())) {
            throw std::out_of_range("Series: index " + std::to_string(t) +
                                    " outside [1," + std::to_string(values_.size()) + "]");
        }
        return values_[static_cast<std::size_t>(t - 1)];
    }

    long size() const { return static_cast<long>(values_.size()); }
    bool empty() const { return values_.empty(); }

    const std::vector<double>& values() const { return values_; }

    void append(double v) {
        if (!std::isfinite(v)) throw std::invalid_argument("Series: values must be finite");
        values_.push_back(v);
    }

    /// Copy of the 1-based range [lo, hi].
    Series slice(long lo, long hi) const {
        if (lo < 1 || hi > size() || lo > hi) throw std::invalid_argument("Series::slice: bad range");
        Series out(std::vector<double>(values_.begin() + (lo - 1), values_.begin() + hi));
        return out;
    }

    /// Optional per-observation labels (e.g. dates); empty or same length as values.
    std::vector<std::string> timestamps;

private:
    std::vector<double> values_;
};

}  // namespace seqcpd
