#include "grip/dyn.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "grip/errors.hpp"

namespace grip {

namespace {

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

constexpr double kGravity = 9.81;        // m/s^2
constexpr double kSlipVelocity = 0.01;   // m/s, friction regularization
constexpr double kPositionBound = 1e3;   // m
constexpr double kVelocityBound = 1e4;   // m/s or rad/s

}  // namespace

double HumanoidModel::total_mass() const {
    double m = 0.0;
    for (const JointSpec& j : joints) m += j.mass;
    return m;
}

Vec3 capsule_inertia(double mass, double radius, double half_len, char axis) {
    double axial = 0.5 * mass * radius * radius;
    double perp = mass * (3.0 * radius * radius + 4.0 * half_len * half_len) / 12.0;
    switch (axis) {
        case 'x': return {axial, perp, perp};
        case 'y': return {perp, axial, perp};
        case 'z': return {perp, perp, axial};
        default: throw DegenerateInput("capsule axis must be x, y or z");
    }
}

HumanoidModel HumanoidModel::standard() {
    struct Row {
        Vec3 offset, com;
        double mass, radius, half_len;
        char axis;
        double kp, kd;
    };
    // clang-format off
    const Row rows[body::kNumJoints] = {
        {{ 0.00,  0.00,  0.00}, { 0.000, 0.00,  0.050}, 10.4, 0.120, 0.080, 'z', 500, 50},   // pelvis
        {{ 0.09,  0.00, -0.08}, { 0.000, 0.00, -0.190},  7.0, 0.070, 0.190, 'z', 1200, 120}, // hip_l
        {{-0.09,  0.00, -0.08}, { 0.000, 0.00, -0.190},  7.0, 0.070, 0.190, 'z', 1200, 120}, // hip_r
        {{ 0.00,  0.00,  0.11}, { 0.000, 0.00,  0.065},  6.0, 0.100, 0.065, 'z', 800, 80},   // spine1
        {{ 0.00,  0.00, -0.38}, { 0.000, 0.00, -0.200},  3.5, 0.050, 0.200, 'z', 1000, 100}, // knee_l
        {{ 0.00,  0.00, -0.38}, { 0.000, 0.00, -0.200},  3.5, 0.050, 0.200, 'z', 1000, 100}, // knee_r
        {{ 0.00,  0.00,  0.13}, { 0.000, 0.00,  0.025},  6.0, 0.100, 0.050, 'z', 800, 80},   // spine2
        {{ 0.00,  0.00, -0.40}, { 0.000, 0.04, -0.030},  1.0, 0.040, 0.050, 'y', 1500, 150}, // ankle_l
        {{ 0.00,  0.00, -0.40}, { 0.000, 0.04, -0.030},  1.0, 0.040, 0.050, 'y', 1500, 150}, // ankle_r
        {{ 0.00,  0.00,  0.05}, { 0.000, 0.00,  0.100},  2.0, 0.090, 0.080, 'z', 800, 80},   // spine3
        {{ 0.00,  0.03, -0.06}, { 0.000, 0.03,  0.000},  0.8, 0.030, 0.090, 'y', 1500, 150}, // foot_l
        {{ 0.00,  0.03, -0.06}, { 0.000, 0.03,  0.000},  0.8, 0.030, 0.090, 'y', 1500, 150}, // foot_r
        {{ 0.00,  0.00,  0.22}, { 0.000, 0.00,  0.045},  1.0, 0.040, 0.045, 'z', 100, 10},  // neck
        {{ 0.07,  0.00,  0.15}, { 0.045, 0.00,  0.000},  1.5, 0.050, 0.045, 'x', 300, 30},  // collar_l
        {{-0.07,  0.00,  0.15}, {-0.045, 0.00,  0.000},  1.5, 0.050, 0.045, 'x', 300, 30},  // collar_r
        {{ 0.00,  0.00,  0.09}, { 0.000, 0.00,  0.080},  6.0, 0.090, 0.080, 'z', 100, 10},  // head
        {{ 0.09,  0.00,  0.00}, { 0.130, 0.00,  0.000},  2.0, 0.040, 0.130, 'x', 300, 30},  // shoulder_l
        {{-0.09,  0.00,  0.00}, {-0.130, 0.00,  0.000},  2.0, 0.040, 0.130, 'x', 300, 30},  // shoulder_r
        {{ 0.26,  0.00,  0.00}, { 0.125, 0.00,  0.000},  1.3, 0.035, 0.125, 'x', 200, 20},  // elbow_l
        {{-0.26,  0.00,  0.00}, {-0.125, 0.00,  0.000},  1.3, 0.035, 0.125, 'x', 200, 20},  // elbow_r
        {{ 0.25,  0.00,  0.00}, { 0.040, 0.00,  0.000},  0.4, 0.030, 0.040, 'x', 100, 10},  // wrist_l
        {{-0.25,  0.00,  0.00}, {-0.040, 0.00,  0.000},  0.4, 0.030, 0.040, 'x', 100, 10},  // wrist_r
        {{ 0.08,  0.00,  0.00}, { 0.030, 0.00,  0.000},  0.3, 0.025, 0.030, 'x', 100, 10},  // hand_l
        {{-0.08,  0.00,  0.00}, {-0.030, 0.00,  0.000},  0.3, 0.025, 0.030, 'x', 100, 10},  // hand_r
    };
    // clang-format on

    HumanoidModel m;
    m.substeps = 8;
    m.joints.resize(body::kNumJoints);
    for (int j = 0; j < body::kNumJoints; ++j) {
        JointSpec& s = m.joints[size_t(j)];
        const Row& r = rows[j];
        s.name = body::joint_name(j);
        s.parent = body::kParents[size_t(j)];
        s.offset = r.offset;
        s.com = r.com;
        s.mass = r.mass;
        s.inertia = capsule_inertia(r.mass, r.radius, r.half_len, r.axis);
        s.kp = r.kp;
        // The derivative action lives in the integrator's implicit joint
        // damping: an explicit -kd*omega torque at these gains is unstable
        // for the light distal bodies at the default substep size.
        s.kd = 0.0;
        s.joint_damping = r.kd;
        s.contact_radius = r.radius;
    }
    // Foot spheres: fore/aft pattern whose centroid sits under the whole-body
    // centre of mass, so uniform penetration is already a pitch equilibrium.
    for (int f : {10, 11}) {
        JointSpec& s = m.joints[size_t(f)];
        s.contact_radius = 0.03;
        s.contact_points = {{0.04, -0.13, 0.0}, {-0.04, -0.13, 0.0},
                            {0.04, 0.075, 0.0}, {-0.04, 0.075, 0.0}};
    }
    // Guard spheres so a fallen body rests on the ground instead of sinking.
    for (int g : {0, 4, 5, 9, 15, 18, 19, 20, 21, 22, 23}) {
        m.joints[size_t(g)].contact_points = {m.joints[size_t(g)].com};
    }
    return m;
}

void Terrain::add_box(const Vec2& min_xy, const Vec2& max_xy, double height) {
    if (!(max_xy.x() > min_xy.x()) || !(max_xy.y() > min_xy.y()) || !(height > 0.0)) {
        throw DegenerateInput("terrain box needs positive extents and height");
    }
    boxes.push_back({min_xy, max_xy, height});
}

double Terrain::height_at(double x, double y) const {
    double h = ground;
    for (const TerrainBox& b : boxes) {
        if (x >= b.min_xy.x() && x <= b.max_xy.x() && y >= b.min_xy.y() && y <= b.max_xy.y()) {
            h = std::max(h, ground + b.height);
        }
    }
    return h;
}

HeightMap sample_height_map(const Terrain& terrain, const Vec3& root_pos,
                            const Rotation& root_rot) {
    const Mat3 h = heading_rotation(root_rot).matrix();
    const double center = terrain.height_at(root_pos.x(), root_pos.y());
    HeightMap map;
    for (int i = 0; i < HeightMap::kSize; ++i) {
        for (int j = 0; j < HeightMap::kSize; ++j) {
            Vec3 local((j - 12) * HeightMap::kSpacing, (i - 12) * HeightMap::kSpacing, 0.0);
            Vec3 world = h * local;
            map.values[size_t(i * HeightMap::kSize + j)] =
                terrain.height_at(root_pos.x() + world.x(), root_pos.y() + world.y()) - center;
        }
    }
    return map;
}

MatX pd_torque(std::span<const Rotation> target_local, std::span<const Rotation> current_local,
               const MatX& angvel_local, const HumanoidModel& model) {
    const int n = model.size();
    if (int(target_local.size()) != n || int(current_local.size()) != n ||
        angvel_local.rows() != n || angvel_local.cols() != 3) {
        throw ShapeMismatch("pd_torque inputs must match the model joint count");
    }
    MatX tau(n, 3);
    for (int j = 0; j < n; ++j) {
        const JointSpec& s = model.joints[size_t(j)];
        Vec3 err = (current_local[size_t(j)].inverse() * target_local[size_t(j)]).rotvec();
        Vec3 t = s.kp * err - s.kd * angvel_local.row(j).transpose();
        tau.row(j) = t.cwiseMax(-s.torque_limit).cwiseMin(s.torque_limit).transpose();
    }
    return tau;
}

Simulation::Simulation(HumanoidModel model, Terrain terrain)
    : model_(std::move(model)), terrain_(std::move(terrain)) {
    const int n = model_.size();
    if (n < 1) throw EmptySet("simulation needs at least the root body");
    if (n > body::kNumJoints) throw ShapeMismatch("model exceeds the 24-joint state layout");
    for (int j = 1; j < n; ++j) {
        if (model_.joints[size_t(j)].parent < 0 || model_.joints[size_t(j)].parent >= j) {
            throw ShapeMismatch("joint parents must precede their children");
        }
        if (!(model_.joints[size_t(j)].mass > 0.0)) throw DegenerateInput("masses must be positive");
    }
    local_.assign(size_t(n), Rotation());
    u_ = VecX::Zero(3 + 3 * n);
    joint_pos_.resize(size_t(n));
    joint_vel_.resize(size_t(n));
    body_omega_.resize(size_t(n));
    com_pos_.resize(size_t(n));
    com_vel_.resize(size_t(n));
    joint_rot_.resize(size_t(n));
    forward_kinematics();
}

void Simulation::set_pose(const Vec3& root_pos, const Rotation& root_rot,
                          std::span<const Rotation> local_rot) {
    if (int(local_rot.size()) != model_.size()) {
        throw ShapeMismatch("pose must provide one rotation per joint");
    }
    root_pos_ = root_pos;
    root_rot_ = root_rot;
    for (size_t j = 1; j < local_rot.size(); ++j) local_[j] = local_rot[j];
    u_.setZero();
    vgrf_ = {0.0, 0.0};
    forward_kinematics();
}

void Simulation::set_state(const SimState& s) {
    const int n = model_.size();
    root_pos_ = s.joint_pos.row(0).transpose();
    root_rot_ = s.joint_rot[0];
    u_.head<3>() = s.joint_linvel.row(0).transpose();
    u_.segment<3>(3) = s.joint_angvel.row(0).transpose();
    for (int j = 1; j < n; ++j) {
        int p = model_.joints[size_t(j)].parent;
        local_[size_t(j)] = s.joint_rot[size_t(p)].inverse() * s.joint_rot[size_t(j)];
        u_.segment<3>(6 + 3 * (j - 1)) =
            (s.joint_angvel.row(j) - s.joint_angvel.row(p)).transpose();
    }
    vgrf_ = {0.0, 0.0};
    forward_kinematics();
}

SimState Simulation::state() const {
    SimState s;
    const int n = model_.size();
    for (int j = 0; j < n; ++j) {
        s.joint_pos.row(j) = joint_pos_[size_t(j)].transpose();
        s.joint_rot[size_t(j)] = Rotation::from_matrix(joint_rot_[size_t(j)]);
        s.joint_linvel.row(j) = joint_vel_[size_t(j)].transpose();
        s.joint_angvel.row(j) = body_omega_[size_t(j)].transpose();
    }
    return s;
}

std::vector<Rotation> Simulation::local_rotations() const {
    std::vector<Rotation> out = local_;
    out[0] = root_rot_;
    return out;
}

MatX Simulation::local_angular_velocities() const {
    const int n = model_.size();
    MatX w(n, 3);
    w.row(0) = u_.segment<3>(3).transpose();
    for (int j = 1; j < n; ++j) {
        int p = model_.joints[size_t(j)].parent;
        w.row(j) = (joint_rot_[size_t(p)].transpose() * u_.segment<3>(6 + 3 * (j - 1))).transpose();
    }
    return w;
}

void Simulation::forward_kinematics() {
    const int n = model_.size();
    joint_pos_[0] = root_pos_;
    joint_rot_[0] = root_rot_.matrix();
    joint_vel_[0] = u_.head<3>();
    body_omega_[0] = u_.segment<3>(3);
    for (int j = 1; j < n; ++j) {
        const JointSpec& s = model_.joints[size_t(j)];
        const size_t p = size_t(s.parent);
        joint_rot_[size_t(j)] = joint_rot_[p] * local_[size_t(j)].matrix();
        joint_pos_[size_t(j)] = joint_pos_[p] + joint_rot_[p] * s.offset;
        joint_vel_[size_t(j)] =
            joint_vel_[p] + body_omega_[p].cross(joint_pos_[size_t(j)] - joint_pos_[p]);
        body_omega_[size_t(j)] = body_omega_[p] + u_.segment<3>(6 + 3 * (j - 1));
    }
    for (int j = 0; j < n; ++j) {
        const JointSpec& s = model_.joints[size_t(j)];
        com_pos_[size_t(j)] = joint_pos_[size_t(j)] + joint_rot_[size_t(j)] * s.com;
        com_vel_[size_t(j)] = joint_vel_[size_t(j)] +
                              body_omega_[size_t(j)].cross(com_pos_[size_t(j)] - joint_pos_[size_t(j)]);
    }
}

void Simulation::substep(const MatX& joint_torques, double h) {
    const int n = model_.size();
    const int dof = 3 + 3 * n;  // blocks: 0 = root translation, j+1 = joint j rotation
    forward_kinematics();

    MatX m_mat = MatX::Zero(dof, dof);
    VecX rhs = VecX::Zero(dof);

    auto apply_force = [&](int body, const Vec3& at, const Vec3& f) {
        rhs.head<3>() += f;
        int j = body;
        while (j >= 0) {
            rhs.segment<3>(3 * (j + 1)) += (at - joint_pos_[size_t(j)]).cross(f);
            j = model_.joints[size_t(j)].parent;
        }
    };

    std::vector<int> chain;
    for (int b = 0; b < n; ++b) {
        const JointSpec& s = model_.joints[size_t(b)];
        chain.clear();
        for (int j = b; j >= 0; j = model_.joints[size_t(j)].parent) chain.push_back(j);

        const Mat3 iw = joint_rot_[size_t(b)] * s.inertia.asDiagonal() *
                        joint_rot_[size_t(b)].transpose();
        const Vec3& x = com_pos_[size_t(b)];

        // Mass matrix: translation and rotational-ancestor blocks.
        m_mat.topLeftCorner<3, 3>() += s.mass * Mat3::Identity();
        for (int a : chain) {
            Mat3 ja = -skew(x - joint_pos_[size_t(a)]);
            m_mat.block<3, 3>(0, 3 * (a + 1)) += s.mass * ja;
            m_mat.block<3, 3>(3 * (a + 1), 0) += s.mass * ja.transpose();
            for (int c : chain) {
                Mat3 jc = -skew(x - joint_pos_[size_t(c)]);
                m_mat.block<3, 3>(3 * (a + 1), 3 * (c + 1)) += s.mass * ja.transpose() * jc + iw;
            }
        }

        // Velocity-product (Coriolis/centrifugal) terms and gyroscopic torque.
        Vec3 a_vp = Vec3::Zero();
        for (int a : chain) {
            Vec3 w = a == 0 ? Vec3(u_.segment<3>(3)) : Vec3(u_.segment<3>(6 + 3 * (a - 1)));
            a_vp += w.cross(com_vel_[size_t(b)] - joint_vel_[size_t(a)]);
        }
        apply_force(b, x, -s.mass * a_vp);
        Vec3 gyro = body_omega_[size_t(b)].cross(iw * body_omega_[size_t(b)]);
        for (int a : chain) rhs.segment<3>(3 * (a + 1)) -= gyro;

        // Gravity.
        apply_force(b, x, Vec3(0.0, 0.0, -kGravity * s.mass));
    }

    // Contacts. The elastic part of the penalty acts as an explicit force;
    // normal damping and the (velocity-regularized) Coulomb friction are
    // velocity-proportional, so they go into the implicit velocity solve
    // below, which keeps the stiff damping unconditionally stable.
    struct Contact {
        int body;
        Vec3 point;
        double pen;
        double c_tangent;
        int foot;  // vGRF slot or -1
    };
    std::vector<Contact> contacts;
    for (int b = 0; b < n; ++b) {
        const JointSpec& s = model_.joints[size_t(b)];
        int foot = s.name == "foot_l" ? 0 : s.name == "foot_r" ? 1 : -1;
        for (const Vec3& cp : s.contact_points) {
            Vec3 y = joint_pos_[size_t(b)] + joint_rot_[size_t(b)] * cp;
            double pen = terrain_.height_at(y.x(), y.y()) + s.contact_radius - y.z();
            if (pen <= 0.0) continue;
            Vec3 v = joint_vel_[size_t(b)] + body_omega_[size_t(b)].cross(y - joint_pos_[size_t(b)]);
            double fn_now = model_.contact_stiffness * pen - model_.contact_damping * v.z();
            if (fn_now <= 0.0) continue;  // separating fast enough: no force
            double c_t = model_.friction * fn_now /
                         std::max(std::hypot(v.x(), v.y()), kSlipVelocity);
            apply_force(b, y, Vec3(0.0, 0.0, model_.contact_stiffness * pen));
            contacts.push_back({b, y, pen, c_t, foot});
        }
    }

    // Actuation: parent-frame joint torques act on each joint's own block.
    for (int j = 1; j < n; ++j) {
        const size_t p = size_t(model_.joints[size_t(j)].parent);
        rhs.segment<3>(3 * (j + 1)) += joint_rot_[p] * joint_torques.row(j).transpose();
    }

    // Implicit velocity solve: (M + h Jc^T D Jc + h diag(joint damping)) u' =
    // M u + h rhs.
    MatX a_mat = m_mat;
    for (const Contact& c : contacts) {
        Vec3 diag(c.c_tangent, c.c_tangent, model_.contact_damping);
        chain.clear();
        for (int j = c.body; j >= 0; j = model_.joints[size_t(j)].parent) chain.push_back(j);
        auto jac = [&](int block) {
            return block < 0 ? Mat3(Mat3::Identity())
                             : Mat3(-skew(c.point - joint_pos_[size_t(block)]));
        };
        std::vector<int> blocks = {-1};  // -1 = root translation
        blocks.insert(blocks.end(), chain.begin(), chain.end());
        for (int a : blocks) {
            for (int b2 : blocks) {
                Mat3 add = h * jac(a).transpose() * diag.asDiagonal() * jac(b2);
                a_mat.block<3, 3>(a < 0 ? 0 : 3 * (a + 1), b2 < 0 ? 0 : 3 * (b2 + 1)) += add;
            }
        }
    }
    for (int j = 1; j < n; ++j) {
        a_mat.block<3, 3>(3 * (j + 1), 3 * (j + 1)).diagonal().array() +=
            h * model_.joints[size_t(j)].joint_damping;
    }

    VecX rhs_total = m_mat * u_ + h * rhs;
    if (model_.fixed_root) {
        a_mat.topRows<6>().setZero();
        a_mat.leftCols<6>().setZero();
        a_mat.topLeftCorner<6, 6>() = Eigen::Matrix<double, 6, 6>::Identity();
        rhs_total.head<6>().setZero();
    }
    u_ = a_mat.ldlt().solve(rhs_total);

    // Ground reaction as actually applied (spring plus implicit damping).
    for (const Contact& c : contacts) {
        if (c.foot < 0) continue;
        Vec3 v_new = u_.head<3>();
        for (int j = c.body; j >= 0; j = model_.joints[size_t(j)].parent) {
            Vec3 w = j == 0 ? Vec3(u_.segment<3>(3)) : Vec3(u_.segment<3>(6 + 3 * (j - 1)));
            v_new += w.cross(c.point - joint_pos_[size_t(j)]);
        }
        double fn = model_.contact_stiffness * c.pen - model_.contact_damping * v_new.z();
        vgrf_[size_t(c.foot)] += std::max(0.0, fn);
    }

    // Semi-implicit: positions advance with the updated velocities.
    root_pos_ += h * u_.head<3>();
    root_rot_ = Rotation::from_rotvec(h * u_.segment<3>(3)) * root_rot_;
    for (int j = 1; j < n; ++j) {
        const size_t p = size_t(model_.joints[size_t(j)].parent);
        Vec3 w_parent = joint_rot_[p].transpose() * u_.segment<3>(6 + 3 * (j - 1));
        local_[size_t(j)] = Rotation::from_rotvec(h * w_parent) * local_[size_t(j)];
    }
}

void Simulation::step(const MatX& joint_torques, double dt) {
    const int n = model_.size();
    if (joint_torques.rows() != n || joint_torques.cols() != 3) {
        throw ShapeMismatch("torques must be one 3-vector per joint");
    }
    if (!(dt > 0.0)) throw DegenerateInput("step size must be positive");
    const int sub = std::max(1, model_.substeps);
    vgrf_ = {0.0, 0.0};
    for (int k = 0; k < sub; ++k) substep(joint_torques, dt / sub);
    vgrf_[0] /= sub;
    vgrf_[1] /= sub;
    forward_kinematics();
    time_ += dt;

    if (!root_pos_.allFinite() || root_pos_.norm() > kPositionBound || !u_.allFinite() ||
        u_.cwiseAbs().maxCoeff() > kVelocityBound) {
        throw NumericalDivergence("simulation state left sanity bounds");
    }
}

double Simulation::kinetic_energy() const {
    double e = 0.0;
    for (int b = 0; b < model_.size(); ++b) {
        const JointSpec& s = model_.joints[size_t(b)];
        Mat3 iw = joint_rot_[size_t(b)] * s.inertia.asDiagonal() * joint_rot_[size_t(b)].transpose();
        e += 0.5 * s.mass * com_vel_[size_t(b)].squaredNorm() +
             0.5 * body_omega_[size_t(b)].dot(iw * body_omega_[size_t(b)]);
    }
    return e;
}

double Simulation::potential_energy() const {
    double e = 0.0;
    for (int b = 0; b < model_.size(); ++b) {
        e += model_.joints[size_t(b)].mass * kGravity * com_pos_[size_t(b)].z();
    }
    return e;
}

SimState step(const SimState& state, const MatX& joint_torques, const Terrain& terrain,
              const HumanoidModel& model, double dt) {
    Simulation sim(model, terrain);
    sim.set_state(state);
    sim.step(joint_torques, dt);
    return sim.state();
}

VecX build_observation(const SensorObservation& sen, const StateDifference& kin_diff,
                       const SimState& sim, const HeightMap& hmap, const AblationMask& mask) {
    VecX obs = VecX::Zero(kObservationWidth);
    int k = 0;

    std::array<double, SensorObservation::kFlatWidth> sen_flat = sen.flatten();
    for (double v : sen_flat) obs(k++) = v;

    // Re-apply the mask so a pre-masked difference and a full one lay out
    // identically.
    StateDifference d = kin_diff;
    if (!mask.orientation) {
        d.d_theta.setZero();
        d.theta_leaf.setZero();
    }
    if (!mask.velocity) d.d_v.setZero();
    if (!mask.angular) d.d_omega.setZero();
    if (!mask.joints_relative && !mask.joints_global) {
        d.d_p.setZero();
        d.p.setZero();
    }
    std::array<double, StateDifference::kFlatWidth> diff_flat = d.flatten();
    for (double v : diff_flat) obs(k++) = v;

    obs.segment<kObsSelfWidth>(k) = self_observation(sim);
    k += kObsSelfWidth;
    for (double v : hmap.values) obs(k++) = v;
    return obs;
}

VecX self_observation(const SimState& sim) {
    VecX out(kObsSelfWidth);
    const Rotation heading = heading_rotation(sim.joint_rot[0]);
    const Mat3 align = heading.inverse().matrix();
    const Vec3 root = sim.joint_pos.row(0).transpose();
    int k = 0;
    for (int j = 0; j < body::kNumJoints; ++j) {
        Rot6D rot = rot6d_from_matrix(Rotation::from_matrix(align * sim.joint_rot[size_t(j)].matrix()));
        out.segment<3>(k) = align * (sim.joint_pos.row(j).transpose() - root);
        k += 3;
        out.segment<3>(k) = rot.a;
        k += 3;
        out.segment<3>(k) = rot.b;
        k += 3;
        out.segment<3>(k) = align * sim.joint_linvel.row(j).transpose();
        k += 3;
        out.segment<3>(k) = align * sim.joint_angvel.row(j).transpose();
        k += 3;
    }
    return out;
}

}  // namespace grip
