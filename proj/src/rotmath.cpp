#include "grip/rotmath.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace grip {

bool Rotation::is_valid(const Mat3& m, double tol) {
    if (!m.allFinite()) return false;
    Mat3 e = m.transpose() * m - Mat3::Identity();
    if (e.cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(m.determinant() - 1.0) <= tol;
}

Rotation Rotation::from_matrix(const Mat3& m) {
    if (!is_valid(m)) throw DegenerateInput("matrix is not a rotation");
    return Rotation(m, unchecked_t{});
}

Rotation Rotation::from_quaternion(const Quat& q) {
    Quat n = q.normalized();
    return Rotation(n.toRotationMatrix(), unchecked_t{});
}

Rotation Rotation::from_rotvec(const Vec3& w) {
    double angle = w.norm();
    if (angle < 1e-14) return Rotation();
    return axis_angle(w / angle, angle);
}

Rotation Rotation::axis_angle(const Vec3& axis, double angle) {
    return Rotation(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), unchecked_t{});
}

Rotation Rotation::rot_x(double a) { return axis_angle(Vec3::UnitX(), a); }
Rotation Rotation::rot_y(double a) { return axis_angle(Vec3::UnitY(), a); }
Rotation Rotation::rot_z(double a) { return axis_angle(Vec3::UnitZ(), a); }

Vec3 Rotation::rotvec() const {
    Eigen::AngleAxisd aa(m_);
    return aa.angle() * aa.axis();
}

Rotation matrix_from_rot6d(const Rot6D& v) {
    double na = v.a.norm();
    if (na < 1e-12) throw DegenerateInput("rot6d: first vector near zero");
    Vec3 e1 = v.a / na;
    Vec3 r = v.b - v.b.dot(e1) * e1;
    double nr = r.norm();
    if (nr < 1e-12) throw DegenerateInput("rot6d: vectors near parallel");
    Vec3 e2 = r / nr;
    Vec3 e3 = e1.cross(e2);
    Mat3 m;
    m.col(0) = e1;
    m.col(1) = e2;
    m.col(2) = e3;
    return Rotation(m, Rotation::unchecked_t{});
}

Rot6D rot6d_from_matrix(const Rotation& r) {
    return Rot6D{r.matrix().col(0), r.matrix().col(1)};
}

double geodesic_angle(const Rotation& a, const Rotation& b) {
    // atan2 on the relative quaternion equals arccos((trace - 1)/2) but stays
    // well conditioned near 0 and pi, where the arccos form loses ~8 digits.
    Quat q = (a.inverse() * b).quaternion();
    return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

Rotation heading_rotation(const Rotation& root, const Vec3& forward, const Rotation* previous) {
    Vec3 f = root * forward;
    double n = std::hypot(f.x(), f.y());
    if (n <= 1e-6) return previous ? *previous : Rotation();
    Vec3 base = forward;
    base.z() = 0.0;
    double nb = base.norm();
    if (nb <= 1e-12) return previous ? *previous : Rotation();
    base /= nb;
    // Yaw angle from the reference forward direction to the projected one.
    double cross_z = base.x() * f.y() - base.y() * f.x();
    double dot = base.x() * f.x() + base.y() * f.y();
    return Rotation::rot_z(std::atan2(cross_z, dot));
}

SimilarityTransform umeyama_align(std::span<const Vec3> src, std::span<const Vec3> dst,
                                  bool with_scale) {
    const size_t n = src.size();
    if (n != dst.size()) throw LengthMismatch("umeyama: size mismatch");
    if (n < 3) throw DegenerateInput("umeyama: need at least 3 points");

    Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
    for (size_t i = 0; i < n; ++i) {
        mu_s += src[i];
        mu_d += dst[i];
    }
    mu_s /= double(n);
    mu_d /= double(n);

    Mat3 cov = Mat3::Zero();  // dst-src cross covariance
    Mat3 src_cov = Mat3::Zero();
    double var_s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        Vec3 ds = src[i] - mu_s;
        Vec3 dd = dst[i] - mu_d;
        cov += dd * ds.transpose();
        src_cov += ds * ds.transpose();
        var_s += ds.squaredNorm();
    }
    cov /= double(n);
    var_s /= double(n);

    // Collinear or coincident sources leave the rotation unconstrained.
    Eigen::SelfAdjointEigenSolver<Mat3> es(src_cov / double(n));
    double l0 = es.eigenvalues()(2), l1 = es.eigenvalues()(1);
    if (l0 <= 1e-18 || l1 <= 1e-9 * l0) throw DegenerateInput("umeyama: degenerate source points");

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU(), v = svd.matrixV();
    Vec3 d = svd.singularValues();
    Vec3 sgn = Vec3::Ones();
    if (u.determinant() * v.determinant() < 0.0) sgn(2) = -1.0;

    Mat3 r = u * sgn.asDiagonal() * v.transpose();
    double s = with_scale ? (d.dot(sgn) / var_s) : 1.0;
    if (s <= 0.0) throw DegenerateInput("umeyama: non-positive scale");
    Vec3 t = mu_d - s * (r * mu_s);

    SimilarityTransform out;
    out.r = Rotation(r, Rotation::unchecked_t{});
    out.t = t;
    out.s = s;
    return out;
}

TimeSeries3 finite_diff_accel(const TimeSeries3& pos) {
    const size_t n = pos.samples.size();
    if (n < 3) throw SequenceTooShort("finite_diff_accel: need at least 3 samples");
    TimeSeries3 out;
    out.dt = pos.dt;
    out.samples.resize(n);
    double inv = 1.0 / (pos.dt * pos.dt);
    for (size_t t = 1; t + 1 < n; ++t) {
        out.samples[t] = (pos.samples[t + 1] - 2.0 * pos.samples[t] + pos.samples[t - 1]) * inv;
    }
    out.samples[0] = out.samples[1];
    out.samples[n - 1] = out.samples[n - 2];
    return out;
}

namespace {

struct Biquad {
    double b0, b1, b2, a1, a2;
};

Biquad butter2(double cutoff_hz, double dt) {
    double k = std::tan(std::numbers::pi * cutoff_hz * dt);
    double norm = 1.0 / (1.0 + std::sqrt(2.0) * k + k * k);
    Biquad q;
    q.b0 = k * k * norm;
    q.b1 = 2.0 * q.b0;
    q.b2 = q.b0;
    q.a1 = 2.0 * (k * k - 1.0) * norm;
    q.a2 = (1.0 - std::sqrt(2.0) * k + k * k) * norm;
    return q;
}

// Direct-form II transposed with steady-state initial conditions scaled by
// the first sample, so constants pass through exactly.
std::vector<double> filter_once(const Biquad& q, std::span<const double> x) {
    double zi2 = q.b2 - q.a2;
    double zi1 = q.b1 - q.a1 + zi2;
    double x0 = x.empty() ? 0.0 : x[0];
    double z1 = zi1 * x0;
    double z2 = zi2 * x0;
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double yi = q.b0 * x[i] + z1;
        z1 = q.b1 * x[i] - q.a1 * yi + z2;
        z2 = q.b2 * x[i] - q.a2 * yi;
        y[i] = yi;
    }
    return y;
}

}  // namespace

std::vector<double> lowpass(std::span<const double> x, double cutoff_hz, double dt) {
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 / dt)) {
        throw InvalidCutoff("lowpass: cutoff must lie in (0, Nyquist)");
    }
    const size_t n = x.size();
    if (n == 0) return {};
    Biquad q = butter2(cutoff_hz, dt);

    // Odd-reflect padding shortens the startup transient of each pass.
    size_t pad = std::min(n > 1 ? n - 1 : size_t(0), size_t(std::ceil(2.0 / (cutoff_hz * dt))));
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    std::vector<double> fwd = filter_once(q, ext);
    std::reverse(fwd.begin(), fwd.end());
    std::vector<double> bwd = filter_once(q, fwd);
    std::reverse(bwd.begin(), bwd.end());

    return std::vector<double>(bwd.begin() + pad, bwd.begin() + pad + n);
}

TimeSeries3 lowpass(const TimeSeries3& x, double cutoff_hz) {
    TimeSeries3 out;
    out.dt = x.dt;
    out.samples.resize(x.samples.size());
    for (int axis = 0; axis < 3; ++axis) {
        std::vector<double> comp(x.samples.size());
        for (size_t i = 0; i < x.samples.size(); ++i) comp[i] = x.samples[i](axis);
        std::vector<double> f = lowpass(comp, cutoff_hz, x.dt);
        for (size_t i = 0; i < f.size(); ++i) out.samples[i](axis) = f[i];
    }
    return out;
}

int cross_correlation_offset(std::span<const double> a, std::span<const double> b, int max_lag) {
    if (max_lag < 0) throw DegenerateInput("cross_correlation_offset: negative max_lag");
    if (a.size() <= size_t(max_lag) || b.size() <= size_t(max_lag)) {
        throw DegenerateInput("cross_correlation_offset: series shorter than max_lag");
    }

    auto center = [](std::span<const double> x, double& var) {
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= double(x.size());
        std::vector<double> c(x.size());
        var = 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            c[i] = x[i] - mean;
            var += c[i] * c[i];
        }
        var /= double(x.size());
        return c;
    };

    double var_a = 0.0, var_b = 0.0;
    std::vector<double> ca = center(a, var_a);
    std::vector<double> cb = center(b, var_b);
    if (var_a < 1e-12 || var_b < 1e-12) throw FlatSignal("cross_correlation_offset: flat series");

    double norm = std::sqrt(var_a * double(a.size()) * var_b * double(b.size()));
    auto score = [&](int lag) {
        // correlate a[t] against b[t - lag]
        double s = 0.0;
        for (size_t t = 0; t < ca.size(); ++t) {
            long j = long(t) - lag;
            if (j < 0 || j >= long(cb.size())) continue;
            s += ca[t] * cb[size_t(j)];
        }
        return s / norm;
    };

    // Visit lags by growing |lag| so the first strict maximum wins ties.
    int best_lag = 0;
    double best = score(0);
    for (int m = 1; m <= max_lag; ++m) {
        for (int lag : {m, -m}) {
            double s = score(lag);
            if (s > best) {
                best = s;
                best_lag = lag;
            }
        }
    }
    return best_lag;
}

Vec3 angular_velocity(const Rotation& prev, const Rotation& cur, double dt) {
    return (cur * prev.inverse()).rotvec() / dt;
}

Rotation chordal_mean(std::span<const Rotation> rs) {
    if (rs.empty()) throw EmptySet("chordal_mean: no rotations");
    Mat3 m = Mat3::Zero();
    for (const Rotation& r : rs) m += r.matrix();
    m /= double(rs.size());
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU(), v = svd.matrixV();
    Vec3 sgn(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
    return Rotation(u * sgn.asDiagonal() * v.transpose(), Rotation::unchecked_t{});
}

}  // namespace grip
