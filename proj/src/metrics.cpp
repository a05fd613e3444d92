#include "mf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mf {

static void check_shapes(const FeatureImage& a, const FeatureImage& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw std::invalid_argument("image shape mismatch");
}

FeatureImage error_map(const FeatureImage& rendered, const FeatureImage& gt) {
    check_shapes(rendered, gt);
    FeatureImage out(rendered.width, rendered.height, 1);
    for (int y = 0; y < rendered.height; ++y)
        for (int x = 0; x < rendered.width; ++x) {
            double acc = 0.0;
            for (int c = 0; c < rendered.channels; ++c) {
                double d = rendered.at(x, y, c) - gt.at(x, y, c);
                acc += d * d;
            }
            out.at(x, y, 0) = std::sqrt(acc);
        }
    return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("length mismatch");
    size_t n = x.size();
    if (n < 2) throw std::invalid_argument("need at least two samples");
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedCorrelationError("pearson undefined for constant input");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(std::span<const double> x) {
    size_t n = x.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("length mismatch");
    std::vector<double> rx = average_ranks(x);
    std::vector<double> ry = average_ranks(y);
    return pearson(rx, ry);
}

namespace {

// Counts inversions (pairs i < j with v[i] > v[j]) by merge sort.
long long count_inversions(std::vector<double>& v, std::vector<double>& tmp, size_t lo,
                           size_t hi) {
    if (hi - lo < 2) return 0;
    size_t mid = lo + (hi - lo) / 2;
    long long cnt = count_inversions(v, tmp, lo, mid) + count_inversions(v, tmp, mid, hi);
    size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            cnt += static_cast<long long>(mid - i);
            tmp[k++] = v[j++];
        } else {
            tmp[k++] = v[i++];
        }
    }
    while (i < mid) tmp[k++] = v[i++];
    while (j < hi) tmp[k++] = v[j++];
    std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
    return cnt;
}

long long tie_pairs(std::span<const double> sorted) {
    long long total = 0;
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        long long g = static_cast<long long>(j - i + 1);
        total += g * (g - 1) / 2;
        i = j + 1;
    }
    return total;
}

}  // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("length mismatch");
    size_t n = x.size();
    if (n < 2) throw std::invalid_argument("need at least two samples");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    long long tot = static_cast<long long>(n) * (n - 1) / 2;
    long long xtie = 0, joint = 0;
    {
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
            long long g = static_cast<long long>(j - i + 1);
            xtie += g * (g - 1) / 2;
            // joint ties within the x-group (sorted by y)
            size_t a = i;
            while (a <= j) {
                size_t b = a;
                while (b + 1 <= j && y[order[b + 1]] == y[order[a]]) ++b;
                long long h = static_cast<long long>(b - a + 1);
                joint += h * (h - 1) / 2;
                a = b + 1;
            }
            i = j + 1;
        }
    }
    std::vector<double> ys(n);
    for (size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
    std::vector<double> tmp(n);
    long long discordant = count_inversions(ys, tmp, 0, n);

    std::sort(ys.begin(), ys.end());
    long long ytie = tie_pairs(ys);

    if (tot == xtie || tot == ytie)
        throw UndefinedCorrelationError("kendall undefined for constant input");

    long long concordant = tot - xtie - ytie + joint - discordant;
    // single sqrt of the product: exact for tie-free inputs (perfect squares),
    // so perfect concordance yields exactly 1.0
    return static_cast<double>(concordant - discordant) /
           std::sqrt(static_cast<double>(tot - xtie) * static_cast<double>(tot - ytie));
}

double psnr(const FeatureImage& a, const FeatureImage& b, double peak) {
    check_shapes(a, b);
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const FeatureImage& a, const FeatureImage& b) {
    check_shapes(a, b);
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (a.width < kWin || a.height < kWin)
        throw std::invalid_argument("image smaller than SSIM window");

    double win[kWin][kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
            double dx = i - (kWin - 1) / 2.0, dy = j - (kWin - 1) / 2.0;
            win[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            wsum += win[i][j];
        }
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) win[i][j] /= wsum;

    double total = 0.0;
    long long count = 0;
    for (int c = 0; c < a.channels; ++c) {
        for (int y0 = 0; y0 + kWin <= a.height; ++y0) {
            for (int x0 = 0; x0 + kWin <= a.width; ++x0) {
                double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
                for (int i = 0; i < kWin; ++i)
                    for (int j = 0; j < kWin; ++j) {
                        double pa = a.at(x0 + j, y0 + i, c);
                        double pb = b.at(x0 + j, y0 + i, c);
                        double wij = win[i][j];
                        ma += wij * pa;
                        mb += wij * pb;
                        va += wij * pa * pa;
                        vb += wij * pb * pb;
                        cov += wij * pa * pb;
                    }
                va -= ma * ma;
                vb -= mb * mb;
                cov -= ma * mb;
                double num = (2 * ma * mb + kC1) * (2 * cov + kC2);
                double den = (ma * ma + mb * mb + kC1) * (va + vb + kC2);
                total += num / den;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

CorrelationReport correlate_variance_error(const FeatureImage& variance_img,
                                           const FeatureImage& error_img,
                                           std::span<const uint8_t> mask) {
    if (variance_img.width != error_img.width || variance_img.height != error_img.height)
        throw std::invalid_argument("image shape mismatch");
    if (variance_img.channels != 1 || error_img.channels != 1)
        throw std::invalid_argument("expected scalar images");
    size_t n = variance_img.data.size();
    if (!mask.empty() && mask.size() != n) throw std::invalid_argument("mask size mismatch");

    std::vector<double> v, e;
    v.reserve(n);
    e.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        if (!mask.empty() && mask[i] == 0) continue;
        v.push_back(variance_img.data[i]);
        e.push_back(error_img.data[i]);
    }
    if (v.size() < 2) throw std::invalid_argument("fewer than two valid pixels");

    CorrelationReport rep;
    rep.samples = v.size();
    rep.pearson = pearson(v, e);
    rep.spearman = spearman(v, e);
    rep.kendall = kendall_tau(v, e);
    return rep;
}

int argmax_score(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("empty candidate list");
    int best = 0;
    for (size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = static_cast<int>(i);
    return best;
}

}  // namespace mf
