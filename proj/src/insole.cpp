#include "grip/insole.hpp"

namespace grip {

InsoleProfile InsoleProfile::default_grid() {
    InsoleProfile p;
    int idx = 0;
    for (int row = 0; row < 4; ++row) {
        double y = 0.09 - 0.06 * row;
        for (int col = 0; col < 4; ++col) {
            double x = -0.03 + 0.02 * col;
            p.cell_positions[0][idx] = Vec2(x, y);
            p.cell_positions[1][idx] = Vec2(x, y);
            ++idx;
        }
    }
    return p;
}

std::array<double, 10> InsoleFeatures::flatten() const {
    std::array<double, 10> out;
    for (int foot = 0; foot < 2; ++foot) {
        out[foot * 5 + 0] = grf[foot];
        out[foot * 5 + 1] = cop[foot].x();
        out[foot * 5 + 2] = cop[foot].y();
        out[foot * 5 + 3] = contact[foot][0] ? 1.0 : 0.0;
        out[foot * 5 + 4] = contact[foot][1] ? 1.0 : 0.0;
    }
    return out;
}

InsoleFeatures extract_features(const PressureFrame& frame, const InsoleProfile& profile) {
    InsoleFeatures f;
    for (int foot = 0; foot < 2; ++foot) {
        double total = 0.0, fore = 0.0, rear = 0.0;
        Vec2 weighted = Vec2::Zero();
        for (int c = 0; c < 16; ++c) {
            double v = frame.cells[foot][c];
            const Vec2& p = profile.cell_positions[foot][c];
            total += v;
            weighted += v * p;
            (p.y() > 0.0 ? fore : rear) += v;
        }
        f.grf[foot] = total;
        f.cop[foot] = total >= profile.cop_min_force ? Vec2(weighted / total) : Vec2::Zero();
        f.contact[foot][0] = fore >= profile.contact_threshold;
        f.contact[foot][1] = rear >= profile.contact_threshold;
    }
    return f;
}

SensorObservation build_sensor_observation(std::span<const SiteImuFrame> imu,
                                           const InsoleFeatures& feats) {
    if (imu.size() != size_t(kNumImuSites)) {
        throw LayoutMismatch("sensor observation needs exactly four IMU frames");
    }
    SensorObservation obs;
    for (int i = 0; i < kNumImuSites; ++i) {
        if (imu[i].site != SensorSite(i)) {
            throw LayoutMismatch("IMU frames must arrive in canonical site order");
        }
        obs.r[i] = imu[i].orientation;
        obs.a[i] = imu[i].accel;
    }
    obs.insole = feats;
    return obs;
}

std::array<double, SensorObservation::kFlatWidth> SensorObservation::flatten() const {
    std::array<double, kFlatWidth> out;
    int k = 0;
    for (int i = 0; i < kNumImuSites; ++i) {
        Rot6D sixd = rot6d_from_matrix(r[i]);
        for (int j = 0; j < 3; ++j) out[k++] = sixd.a(j);
        for (int j = 0; j < 3; ++j) out[k++] = sixd.b(j);
    }
    for (int i = 0; i < kNumImuSites; ++i) {
        for (int j = 0; j < 3; ++j) out[k++] = a[i](j);
    }
    std::array<double, 10> ins = insole.flatten();
    for (double v : ins) out[k++] = v;
    return out;
}

}  // namespace grip
