#include "sat/eval.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace sat::eval {

double region_J(const maskops::BinaryMask& pred, const maskops::BinaryMask& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw std::invalid_argument("region_J: shape mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        const bool a = pred.values[i] != 0, b = gt.values[i] != 0;
        inter += a && b;
        uni += a || b;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

int default_boundary_tolerance(int height, int width) {
    return static_cast<int>(std::ceil(0.008 * std::sqrt(static_cast<double>(height) * height +
                                                        static_cast<double>(width) * width)));
}

namespace {

std::vector<uint8_t> boundary_pixels(const maskops::BinaryMask& m) {
    const int h = m.height, w = m.width;
    std::vector<uint8_t> b(static_cast<size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m.at(y, x)) continue;
            const bool edge = (y > 0 && !m.at(y - 1, x)) || (y + 1 < h && !m.at(y + 1, x)) ||
                              (x > 0 && !m.at(y, x - 1)) || (x + 1 < w && !m.at(y, x + 1));
            if (edge) b[static_cast<size_t>(y) * w + x] = 1;
        }
    return b;
}

// Felzenszwalb-Huttenlocher exact 1D squared distance transform.
void edt_1d(std::vector<double>& f) {
    const int n = static_cast<int>(f.size());
    std::vector<int> v(n);
    std::vector<double> z(n + 1), d(n);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
    f = d;
}

// exact squared Euclidean distance to the nearest set pixel
std::vector<double> squared_edt(const std::vector<uint8_t>& set, int h, int w) {
    constexpr double kInf = 1e18;
    std::vector<double> d(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < d.size(); ++i) d[i] = set[i] ? 0.0 : kInf;
    std::vector<double> col(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col[y] = d[static_cast<size_t>(y) * w + x];
        edt_1d(col);
        for (int y = 0; y < h; ++y) d[static_cast<size_t>(y) * w + x] = col[y];
    }
    std::vector<double> row(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) row[x] = d[static_cast<size_t>(y) * w + x];
        edt_1d(row);
        for (int x = 0; x < w; ++x) d[static_cast<size_t>(y) * w + x] = row[x];
    }
    return d;
}

} // namespace

double boundary_F(const maskops::BinaryMask& pred, const maskops::BinaryMask& gt, int tolerance) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw std::invalid_argument("boundary_F: shape mismatch");
    const int h = gt.height, w = gt.width;
    const auto pb = boundary_pixels(pred);
    const auto gb = boundary_pixels(gt);
    size_t np = 0, ng = 0;
    for (uint8_t v : pb) np += v;
    for (uint8_t v : gb) ng += v;
    if (np == 0 && ng == 0) return 1.0;
    if (np == 0 || ng == 0) return 0.0;

    const double tol2 = static_cast<double>(tolerance) * tolerance;
    const auto dist_to_gt = squared_edt(gb, h, w);
    const auto dist_to_pred = squared_edt(pb, h, w);
    size_t matched_p = 0, matched_g = 0;
    for (size_t i = 0; i < pb.size(); ++i) {
        if (pb[i] && dist_to_gt[i] <= tol2) ++matched_p;
        if (gb[i] && dist_to_pred[i] <= tol2) ++matched_g;
    }
    const double precision = static_cast<double>(matched_p) / static_cast<double>(np);
    const double recall = static_cast<double>(matched_g) / static_cast<double>(ng);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double decay_of(const std::vector<double>& per_frame) {
    const int n = static_cast<int>(per_frame.size());
    const int q = n / 4;
    if (q == 0) return 0.0;
    double first = 0.0, last = 0.0;
    for (int i = 0; i < q; ++i) first += per_frame[i];
    const int last_begin = 3 * q;
    for (int i = last_begin; i < n; ++i) last += per_frame[i];
    return first / q - last / (n - last_begin);
}

SequenceResult evaluate_sequence(const std::vector<maskops::BinaryMask>& preds,
                                 const std::vector<maskops::BinaryMask>& gts) {
    if (preds.size() != gts.size()) throw std::invalid_argument("evaluate_sequence: length mismatch");
    if (preds.empty()) throw std::invalid_argument("evaluate_sequence: empty sequence");
    SequenceResult r;
    for (size_t f = 1; f < preds.size(); ++f) {
        r.per_frame_J.push_back(region_J(preds[f], gts[f]));
        r.per_frame_F.push_back(boundary_F(preds[f], gts[f]));
    }
    if (!r.per_frame_J.empty()) {
        double sj = 0.0, sf = 0.0;
        for (double v : r.per_frame_J) sj += v;
        for (double v : r.per_frame_F) sf += v;
        r.J_mean = sj / r.per_frame_J.size();
        r.F_mean = sf / r.per_frame_F.size();
        r.JF_mean = (r.J_mean + r.F_mean) / 2.0;
        r.J_decay = decay_of(r.per_frame_J);
    }
    return r;
}

DatasetReport evaluate_dataset(const std::vector<SequenceResult>& results) {
    DatasetReport rep;
    rep.sequences = static_cast<int>(results.size());
    if (results.empty()) return rep;
    for (const auto& r : results) {
        rep.J_mean += r.J_mean;
        rep.F_mean += r.F_mean;
        rep.J_decay += r.J_decay;
    }
    rep.J_mean /= results.size();
    rep.F_mean /= results.size();
    rep.J_decay /= results.size();
    rep.JF_mean = (rep.J_mean + rep.F_mean) / 2.0;
    return rep;
}

void write_sequence_csv(const std::string& path, const std::vector<SequenceResult>& results) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "sequence,object,J_mean,F_mean,JF_mean,J_decay\n";
    for (const auto& r : results) {
        out << r.sequence << "," << r.object_id << "," << r.J_mean << "," << r.F_mean << "," << r.JF_mean << ","
            << r.J_decay << "\n";
    }
}

void write_dataset_json(const std::string& path, const DatasetReport& report,
                        const std::vector<SequenceResult>& results) {
    nlohmann::json j;
    j["J_mean"] = report.J_mean;
    j["F_mean"] = report.F_mean;
    j["JF_mean"] = report.JF_mean;
    j["J_decay"] = report.J_decay;
    j["sequences"] = report.sequences;
    nlohmann::json per;
    for (const auto& r : results) {
        per.push_back({{"sequence", r.sequence},
                       {"object", r.object_id},
                       {"J_mean", r.J_mean},
                       {"F_mean", r.F_mean},
                       {"JF_mean", r.JF_mean},
                       {"J_decay", r.J_decay}});
    }
    j["per_sequence"] = per;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

} // namespace sat::eval
