//! Floating-base articulated dynamics.
//!
//! Generalised velocity layout: `[omega_base (3, base frame), v_base (3, base
//! frame), joint rates (12)]`. The mass matrix comes from the composite
//! rigid-body algorithm and the velocity-product bias from recursive
//! Newton-Euler, both in body-local coordinates. For a free base, uniform
//! gravity only contributes a uniform acceleration of every body, so it is
//! added analytically to the base's world-frame motion; this keeps ballistic
//! flight exact at any step size. A fixed base (used for bench tests)
//! instead folds gravity into the bias.

use nalgebra::{Matrix3, SMatrix, SVector, UnitQuaternion, Vector3};

use super::model::{RobotModel, JOINTS_PER_LEG, JOINT_NAMES, LEG_NAMES, NUM_DOF, NUM_JOINTS, NUM_LEGS};
use super::state::SimState;
use super::terrain::Terrain;
use super::SimError;

pub type MassMatrix = SMatrix<f64, NUM_DOF, NUM_DOF>;
pub type GenVector = SVector<f64, NUM_DOF>;

const NUM_BODIES: usize = NUM_JOINTS;

/// Penalty contact and environment constants.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactParams {
    /// m/s², magnitude of gravity along world -z.
    pub gravity: f64,
    /// Normal spring stiffness, N/m.
    pub stiffness: f64,
    /// Normal damping, N·s/m.
    pub damping: f64,
    /// Tangential velocity damping, N·s/m (before the Coulomb clamp).
    pub friction_damping: f64,
    /// Binary switch threshold on the normal force, N.
    pub switch_threshold: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams { gravity: 9.81, stiffness: 4000.0, damping: 40.0, friction_damping: 400.0, switch_threshold: 0.5 }
    }
}

/// Optional constraints and loads for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub contact: ContactParams,
    /// Pin the base in place (bench mode).
    pub fixed_base: bool,
    /// Joints held rigidly at their current angle.
    pub locked_joints: [bool; NUM_JOINTS],
    /// Force at the base centre of mass, world frame, N.
    pub external_force: Vector3<f64>,
    /// Torque about the base axes, base frame, N·m.
    pub external_torque: Vector3<f64>,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            contact: ContactParams::default(),
            fixed_base: false,
            locked_joints: [false; NUM_JOINTS],
            external_force: Vector3::zeros(),
            external_torque: Vector3::zeros(),
        }
    }
}

/// Per-foot contact outcome of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FootContact {
    pub in_contact: bool,
    /// N
    pub normal_force: f64,
    /// Tangential force magnitude, N.
    pub tangential_force: f64,
    /// Penetration depth, m (0 when separated).
    pub penetration: f64,
    /// World frame, m/s, at the start of the step.
    pub foot_velocity: [f64; 3],
    pub touchdown: bool,
    /// |v_f| at the step contact began (0 otherwise), m/s.
    pub touchdown_speed: f64,
    /// Flight duration ending at a touchdown, otherwise the running airborne time, s.
    pub air_time: f64,
    /// Tangential foot velocity while in contact (zero otherwise), m/s.
    pub slip_velocity: [f64; 2],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContactReport {
    pub feet: [FootContact; NUM_LEGS],
    pub self_collision_count: u32,
}

#[derive(Clone, Copy)]
struct Motion {
    ang: Vector3<f64>,
    lin: Vector3<f64>,
}

#[derive(Clone, Copy)]
struct Force {
    ang: Vector3<f64>,
    lin: Vector3<f64>,
}

impl Motion {
    fn zero() -> Self {
        Motion { ang: Vector3::zeros(), lin: Vector3::zeros() }
    }

    fn cross_motion(&self, m: &Motion) -> Motion {
        Motion { ang: self.ang.cross(&m.ang), lin: self.ang.cross(&m.lin) + self.lin.cross(&m.ang) }
    }

    fn cross_force(&self, f: &Force) -> Force {
        Force { ang: self.ang.cross(&f.ang) + self.lin.cross(&f.lin), lin: self.ang.cross(&f.lin) }
    }
}

impl std::ops::Add for Motion {
    type Output = Motion;
    fn add(self, o: Motion) -> Motion {
        Motion { ang: self.ang + o.ang, lin: self.lin + o.lin }
    }
}

impl std::ops::AddAssign for Force {
    fn add_assign(&mut self, o: Force) {
        self.ang += o.ang;
        self.lin += o.lin;
    }
}

/// Rigid-body inertia about the frame origin: mass, first moment and rotational inertia.
#[derive(Clone, Copy)]
struct Inertia {
    mass: f64,
    com: Vector3<f64>,
    /// About the centre of mass.
    rot_com: Matrix3<f64>,
}

fn parallel_axis(mass: f64, c: &Vector3<f64>) -> Matrix3<f64> {
    mass * (Matrix3::identity() * c.norm_squared() - c * c.transpose())
}

impl Inertia {
    fn rot_origin(&self) -> Matrix3<f64> {
        self.rot_com + parallel_axis(self.mass, &self.com)
    }

    fn apply(&self, v: &Motion) -> Force {
        let h = self.com * self.mass;
        Force { ang: self.rot_origin() * v.ang + h.cross(&v.lin), lin: v.lin * self.mass - h.cross(&v.ang) }
    }

    /// Express in the parent frame; `rot` maps child to parent axes, `offset` is the child origin in the parent.
    fn to_parent(&self, rot: &Matrix3<f64>, offset: &Vector3<f64>) -> Inertia {
        Inertia { mass: self.mass, com: rot * self.com + offset, rot_com: rot * self.rot_com * rot.transpose() }
    }

    fn combine(&self, o: &Inertia) -> Inertia {
        let mass = self.mass + o.mass;
        let com = (self.com * self.mass + o.com * o.mass) / mass;
        let rot_com = self.rot_com
            + parallel_axis(self.mass, &(self.com - com))
            + o.rot_com
            + parallel_axis(o.mass, &(o.com - com));
        Inertia { mass, com, rot_com }
    }
}

/// Per-body kinematic quantities, all relative to the base frame unless stated.
pub(crate) struct Frames {
    /// Child-to-parent rotation for each joint body.
    rot_parent: [Matrix3<f64>; NUM_BODIES],
    /// Body origin in the parent frame.
    offset: [Vector3<f64>; NUM_BODIES],
    /// Body-to-base rotation.
    pub(crate) rot_base: [Matrix3<f64>; NUM_BODIES],
    /// Body origin in the base frame.
    pub(crate) origin_base: [Vector3<f64>; NUM_BODIES],
    /// Joint axis in the base frame.
    pub(crate) axis_base: [Vector3<f64>; NUM_BODIES],
    /// Foot sphere centres in the base frame.
    pub(crate) foot_base: [Vector3<f64>; NUM_LEGS],
}

pub(crate) fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    let k = axis;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * s + kx * kx * (1.0 - c)
}

fn parent_of(body: usize) -> Option<usize> {
    if body % JOINTS_PER_LEG == 0 {
        None
    } else {
        Some(body - 1)
    }
}

pub(crate) fn frames(model: &RobotModel, q: &[f64; NUM_JOINTS]) -> Frames {
    let mut f = Frames {
        rot_parent: [Matrix3::identity(); NUM_BODIES],
        offset: [Vector3::zeros(); NUM_BODIES],
        rot_base: [Matrix3::identity(); NUM_BODIES],
        origin_base: [Vector3::zeros(); NUM_BODIES],
        axis_base: [Vector3::zeros(); NUM_BODIES],
        foot_base: [Vector3::zeros(); NUM_LEGS],
    };
    for (l, leg) in model.legs.iter().enumerate() {
        for j in 0..JOINTS_PER_LEG {
            let b = l * JOINTS_PER_LEG + j;
            let link = &leg.links[j];
            let axis = Vector3::from(link.joint_axis);
            f.rot_parent[b] = rotation_about(&axis, q[b]);
            f.offset[b] = if j == 0 {
                Vector3::from(leg.hip_offset)
            } else {
                Vector3::new(0.0, 0.0, -leg.links[j - 1].length)
            };
            match parent_of(b) {
                None => {
                    f.rot_base[b] = f.rot_parent[b];
                    f.origin_base[b] = f.offset[b];
                }
                Some(p) => {
                    f.rot_base[b] = f.rot_base[p] * f.rot_parent[b];
                    f.origin_base[b] = f.origin_base[p] + f.rot_base[p] * f.offset[b];
                }
            }
            // the axis is invariant under its own rotation
            f.axis_base[b] = f.rot_base[b] * axis;
        }
        let last = l * JOINTS_PER_LEG + JOINTS_PER_LEG - 1;
        f.foot_base[l] =
            f.origin_base[last] + f.rot_base[last] * Vector3::new(0.0, 0.0, -leg.links[JOINTS_PER_LEG - 1].length);
    }
    f
}

fn body_inertia(model: &RobotModel, b: usize) -> Inertia {
    let link = model.link(b);
    Inertia {
        mass: link.mass,
        com: Vector3::new(0.0, 0.0, -0.5 * link.length),
        rot_com: Matrix3::from_fn(|r, c| link.inertia[r][c]),
    }
}

fn base_inertia(model: &RobotModel) -> Inertia {
    Inertia { mass: model.base_mass, com: Vector3::zeros(), rot_com: Matrix3::from_fn(|r, c| model.base_inertia[r][c]) }
}

/// Parent-frame motion expressed at the child origin in child axes.
fn motion_to_child(rot: &Matrix3<f64>, offset: &Vector3<f64>, m: &Motion) -> Motion {
    let rt = rot.transpose();
    Motion { ang: rt * m.ang, lin: rt * (m.lin + m.ang.cross(offset)) }
}

fn force_to_parent(rot: &Matrix3<f64>, offset: &Vector3<f64>, f: &Force) -> Force {
    let lin = rot * f.lin;
    Force { ang: rot * f.ang + offset.cross(&lin), lin }
}

/// Joint-space mass matrix (composite rigid-body algorithm).
pub(crate) fn mass_matrix(model: &RobotModel, fr: &Frames) -> MassMatrix {
    let mut m = MassMatrix::zeros();
    let mut composite: [Inertia; NUM_BODIES] = std::array::from_fn(|b| body_inertia(model, b));
    for b in (0..NUM_BODIES).rev() {
        if let Some(p) = parent_of(b) {
            let moved = composite[b].to_parent(&fr.rot_parent[b], &fr.offset[b]);
            composite[p] = composite[p].combine(&moved);
        }
    }
    let mut base = base_inertia(model);
    for l in 0..NUM_LEGS {
        let b = l * JOINTS_PER_LEG;
        base = base.combine(&composite[b].to_parent(&fr.rot_parent[b], &fr.offset[b]));
    }
    let io = base.rot_origin();
    let h = base.com * base.mass;
    let hx = h.cross_matrix();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&io);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&hx);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&hx.transpose());
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Matrix3::identity() * base.mass));

    for b in 0..NUM_BODIES {
        let axis = Vector3::from(model.link(b).joint_axis);
        let mut f = composite[b].apply(&Motion { ang: axis, lin: Vector3::zeros() });
        let i = 6 + b;
        m[(i, i)] = axis.dot(&f.ang) + model.joint_armature;
        let mut cur = b;
        while let Some(p) = parent_of(cur) {
            f = force_to_parent(&fr.rot_parent[cur], &fr.offset[cur], &f);
            cur = p;
            let v = Vector3::from(model.link(cur).joint_axis).dot(&f.ang);
            m[(i, 6 + cur)] = v;
            m[(6 + cur, i)] = v;
        }
        f = force_to_parent(&fr.rot_parent[cur], &fr.offset[cur], &f);
        for k in 0..3 {
            m[(k, i)] = f.ang[k];
            m[(i, k)] = f.ang[k];
            m[(3 + k, i)] = f.lin[k];
            m[(i, 3 + k)] = f.lin[k];
        }
    }
    m
}

/// Bias forces `C(q, v)` (recursive Newton-Euler with zero acceleration).
/// `base_accel` is the spatial acceleration imposed on the base (gravity trick).
fn bias_forces(model: &RobotModel, fr: &Frames, state: &SimState, base_accel: Motion) -> GenVector {
    let base_vel = Motion { ang: state.base_angular_velocity, lin: state.base_linear_velocity_body() };
    let base_i = base_inertia(model);
    let mut base_force = base_i.apply(&base_accel);
    base_force += base_vel.cross_force(&base_i.apply(&base_vel));

    let mut vel = [Motion::zero(); NUM_BODIES];
    let mut acc = [Motion::zero(); NUM_BODIES];
    let mut force = [Force { ang: Vector3::zeros(), lin: Vector3::zeros() }; NUM_BODIES];
    for b in 0..NUM_BODIES {
        let (pv, pa) = match parent_of(b) {
            None => (base_vel, base_accel),
            Some(p) => (vel[p], acc[p]),
        };
        let axis = Vector3::from(model.link(b).joint_axis);
        let joint = Motion { ang: axis * state.joint_velocities[b], lin: Vector3::zeros() };
        vel[b] = motion_to_child(&fr.rot_parent[b], &fr.offset[b], &pv) + joint;
        acc[b] = motion_to_child(&fr.rot_parent[b], &fr.offset[b], &pa) + vel[b].cross_motion(&joint);
        let inertia = body_inertia(model, b);
        force[b] = inertia.apply(&acc[b]);
        force[b] += vel[b].cross_force(&inertia.apply(&vel[b]));
    }
    let mut c = GenVector::zeros();
    for b in (0..NUM_BODIES).rev() {
        let axis = Vector3::from(model.link(b).joint_axis);
        c[6 + b] = axis.dot(&force[b].ang);
        let up = force_to_parent(&fr.rot_parent[b], &fr.offset[b], &force[b]);
        match parent_of(b) {
            Some(p) => force[p] += up,
            None => base_force += up,
        }
    }
    for k in 0..3 {
        c[k] = base_force.ang[k];
        c[3 + k] = base_force.lin[k];
    }
    c
}

/// World-frame linear Jacobian (3 x 18) of a point fixed on the last body of `leg`.
/// `point_base` is the point in base coordinates.
pub(crate) fn point_jacobian(
    fr: &Frames,
    leg: usize,
    point_base: &Vector3<f64>,
    rot: &Matrix3<f64>,
) -> SMatrix<f64, 3, NUM_DOF> {
    let mut jb = SMatrix::<f64, 3, NUM_DOF>::zeros();
    jb.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-point_base.cross_matrix()));
    jb.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    for j in 0..JOINTS_PER_LEG {
        let b = leg * JOINTS_PER_LEG + j;
        let col = fr.axis_base[b].cross(&(point_base - fr.origin_base[b]));
        jb.fixed_view_mut::<3, 1>(0, 6 + b).copy_from(&col);
    }
    rot * jb
}

pub(crate) fn generalized_velocity(state: &SimState) -> GenVector {
    let mut v = GenVector::zeros();
    v.fixed_rows_mut::<3>(0).copy_from(&state.base_angular_velocity);
    v.fixed_rows_mut::<3>(3).copy_from(&state.base_linear_velocity_body());
    for j in 0..NUM_JOINTS {
        v[6 + j] = state.joint_velocities[j];
    }
    v
}

pub(crate) fn kinetic_energy(model: &RobotModel, state: &SimState) -> f64 {
    let m = mass_matrix(model, &frames(model, &state.joint_positions));
    let v = generalized_velocity(state);
    0.5 * v.dot(&(m * v))
}

fn body_name(index: usize) -> String {
    format!("{}.{}", LEG_NAMES[index / JOINTS_PER_LEG], JOINT_NAMES[index % JOINTS_PER_LEG])
}

fn check_finite(state: &SimState) -> Result<(), SimError> {
    let base_ok = state.base_position.iter().all(|v| v.is_finite())
        && state.base_orientation.coords.iter().all(|v| v.is_finite())
        && state.base_linear_velocity.iter().all(|v| v.is_finite())
        && state.base_angular_velocity.iter().all(|v| v.is_finite());
    if !base_ok {
        return Err(SimError::Diverged { body: "base".into() });
    }
    for j in 0..NUM_JOINTS {
        if !state.joint_positions[j].is_finite() || !state.joint_velocities[j].is_finite() {
            return Err(SimError::Diverged { body: body_name(j) });
        }
    }
    Ok(())
}

/// One semi-implicit Euler step with default options.
pub fn step(
    model: &RobotModel,
    state: &SimState,
    tau: &[f64; NUM_JOINTS],
    terrain: &Terrain,
    dt: f64,
) -> Result<(SimState, ContactReport), SimError> {
    step_with(model, state, tau, terrain, dt, &StepOptions::default())
}

pub fn step_with(
    model: &RobotModel,
    state: &SimState,
    tau: &[f64; NUM_JOINTS],
    terrain: &Terrain,
    dt: f64,
    opts: &StepOptions,
) -> Result<(SimState, ContactReport), SimError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SimError::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    if tau.iter().any(|t| !t.is_finite()) {
        return Err(SimError::InvalidInput("torques contain non-finite values".into()));
    }
    check_finite(state)?;

    let rot = *state.base_orientation.to_rotation_matrix().matrix();
    let fr = frames(model, &state.joint_positions);
    let gravity_world = Vector3::new(0.0, 0.0, -opts.contact.gravity);

    let base_accel = if opts.fixed_base {
        Motion { ang: Vector3::zeros(), lin: -(rot.transpose() * gravity_world) }
    } else {
        Motion::zero()
    };

    let mut mass = mass_matrix(model, &fr);
    let bias = bias_forces(model, &fr, state, base_accel);
    let vel = generalized_velocity(state);

    let mut locked = [false; NUM_DOF];
    if opts.fixed_base {
        locked[..6].fill(true);
    }
    for j in 0..NUM_JOINTS {
        locked[6 + j] = opts.locked_joints[j];
    }
    for k in 0..NUM_DOF {
        if locked[k] {
            for c in 0..NUM_DOF {
                mass[(k, c)] = 0.0;
                mass[(c, k)] = 0.0;
            }
            mass[(k, k)] = 1.0;
        }
    }
    let chol = mass.cholesky().ok_or_else(|| SimError::Diverged { body: "mass matrix".into() })?;

    let mut gen_force = -bias;
    for j in 0..NUM_JOINTS {
        gen_force[6 + j] += tau[j];
    }
    let rt = rot.transpose();
    let torque = opts.external_torque;
    let force_body = rt * opts.external_force;
    for k in 0..3 {
        gen_force[k] += torque[k];
        gen_force[3 + k] += force_body[k];
    }

    // contacts
    let mut report = ContactReport::default();
    let mut next_feet = state.feet;
    for leg in 0..NUM_LEGS {
        let p_base = fr.foot_base[leg];
        let p_world = state.base_position + rot * p_base;
        let jac = point_jacobian(&fr, leg, &p_base, &rot);
        let v_world: Vector3<f64> = jac * vel;
        let surf = terrain.surface(&p_world);
        let penetration = model.foot_radius - surf.distance;
        let mut fc = FootContact { foot_velocity: v_world.into(), ..Default::default() };
        if penetration > 0.0 {
            let n = surf.normal;
            let vn = v_world.dot(&n);
            let vt = v_world - n * vn;

            // effective mass along a world direction, for damping caps
            let mut jt = jac.transpose();
            for k in 0..NUM_DOF {
                if locked[k] {
                    jt.row_mut(k).fill(0.0);
                }
            }
            let minv_jt = chol.solve(&jt);
            let inv_lambda: Matrix3<f64> = jac * minv_jt;
            let eff_mass = |d: &Vector3<f64>| {
                let w = d.dot(&(inv_lambda * d));
                if w > 1e-12 {
                    1.0 / w
                } else {
                    f64::INFINITY
                }
            };

            let spring = opts.contact.stiffness * penetration;
            // explicit damping must not reverse the normal velocity within one step
            let cap = if vn == 0.0 { 0.0 } else { eff_mass(&n) * vn.abs() / dt };
            let damping = (-opts.contact.damping * vn).clamp(-cap, cap);
            let fn_mag = (spring + damping).max(0.0);

            let vt_norm = vt.norm();
            let mut ft = Vector3::zeros();
            if vt_norm > 0.0 && fn_mag > 0.0 {
                let dir = vt / vt_norm;
                let mag = (opts.contact.friction_damping * vt_norm)
                    .min(terrain.friction_coefficient * fn_mag)
                    .min(eff_mass(&dir) * vt_norm / dt);
                ft = -dir * mag;
            }
            let total = n * fn_mag + ft;
            gen_force += jac.transpose() * total;

            fc.normal_force = fn_mag;
            fc.tangential_force = ft.norm();
            fc.penetration = penetration;
        }
        fc.in_contact = fc.normal_force > opts.contact.switch_threshold;
        if fc.in_contact {
            // tangential velocity in the local surface plane (x along world x projected)
            let n = surf.normal;
            let vt = v_world - n * v_world.dot(&n);
            let t1 = (Vector3::x() - n * n.x).normalize();
            let t2 = n.cross(&t1);
            fc.slip_velocity = [vt.dot(&t1), vt.dot(&t2)];
        }

        let tracker = &mut next_feet[leg];
        if fc.in_contact {
            if !tracker.in_contact {
                fc.touchdown = true;
                fc.touchdown_speed = v_world.norm();
                fc.air_time = tracker.air_time;
                tracker.air_time = 0.0;
                tracker.contact_time = 0.0;
            }
            tracker.contact_time += dt;
        } else {
            if tracker.in_contact {
                tracker.air_time = 0.0;
            }
            tracker.air_time += dt;
            fc.air_time = tracker.air_time;
        }
        tracker.in_contact = fc.in_contact;
        report.feet[leg] = fc;
    }

    let accel = chol.solve(&gen_force);

    let mut next = state.clone();
    next.feet = next_feet;
    next.sim_time = state.sim_time + dt;

    // velocities first
    if opts.fixed_base {
        next.base_linear_velocity = Vector3::zeros();
        next.base_angular_velocity = Vector3::zeros();
    } else {
        let alpha: Vector3<f64> = accel.fixed_rows::<3>(0).into();
        let a_lin: Vector3<f64> = accel.fixed_rows::<3>(3).into();
        let v_body = state.base_linear_velocity_body();
        let classical = a_lin + state.base_angular_velocity.cross(&v_body);
        next.base_linear_velocity = state.base_linear_velocity + (rot * classical + gravity_world) * dt;
        next.base_angular_velocity = state.base_angular_velocity + alpha * dt;
    }
    for j in 0..NUM_JOINTS {
        if opts.locked_joints[j] {
            next.joint_velocities[j] = 0.0;
        } else {
            let limit = model.link(j).joint_velocity_limit;
            next.joint_velocities[j] = (state.joint_velocities[j] + accel[6 + j] * dt).clamp(-limit, limit);
        }
    }

    // then positions
    if !opts.fixed_base {
        next.base_position =
            state.base_position + next.base_linear_velocity * dt - gravity_world * (0.5 * dt * dt);
        let dq = UnitQuaternion::from_scaled_axis(next.base_angular_velocity * dt);
        next.base_orientation = UnitQuaternion::new_normalize((state.base_orientation * dq).into_inner());
    }
    for j in 0..NUM_JOINTS {
        next.joint_positions[j] = state.joint_positions[j] + next.joint_velocities[j] * dt;
    }

    check_finite(&next)?;
    report.self_collision_count = super::collision::self_collision_count(model, &next);
    Ok((next, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigidsim::kinematics;

    /// Mass matrix by brute force: kinetic energy Hessian from body velocities.
    fn kinetic_energy_bodies(model: &RobotModel, state: &SimState) -> f64 {
        let fr = frames(model, &state.joint_positions);
        let rot = *state.base_orientation.to_rotation_matrix().matrix();
        let v = generalized_velocity(state);
        let base_i = base_inertia(model);
        let bv = Motion { ang: state.base_angular_velocity, lin: state.base_linear_velocity_body() };
        let mut ke = 0.5 * (bv.ang.dot(&base_i.apply(&bv).ang) + bv.lin.dot(&base_i.apply(&bv).lin));
        let _ = rot;
        for b in 0..NUM_BODIES {
            // velocity of body com via finite differencing the frames would be independent; use Jacobians instead
            let link = model.link(b);
            let com_body = Vector3::new(0.0, 0.0, -0.5 * link.length);
            let com_base = fr.origin_base[b] + fr.rot_base[b] * com_body;
            let leg = b / JOINTS_PER_LEG;
            let mut jb = SMatrix::<f64, 3, NUM_DOF>::zeros();
            jb.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-com_base.cross_matrix()));
            jb.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
            let mut jw = SMatrix::<f64, 3, NUM_DOF>::zeros();
            jw.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
            for j in 0..JOINTS_PER_LEG {
                let k = leg * JOINTS_PER_LEG + j;
                if k > b {
                    break;
                }
                let col = fr.axis_base[k].cross(&(com_base - fr.origin_base[k]));
                jb.fixed_view_mut::<3, 1>(0, 6 + k).copy_from(&col);
                jw.fixed_view_mut::<3, 1>(0, 6 + k).copy_from(&fr.axis_base[k]);
            }
            let vc: Vector3<f64> = jb * v;
            let w: Vector3<f64> = jw * v;
            let i_base = fr.rot_base[b] * Matrix3::from_fn(|r, c| link.inertia[r][c]) * fr.rot_base[b].transpose();
            ke += 0.5 * link.mass * vc.norm_squared() + 0.5 * w.dot(&(i_base * w));
            ke += 0.5 * model.joint_armature * state.joint_velocities[b].powi(2);
        }
        ke
    }

    fn random_state(seed: u64) -> SimState {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let model = RobotModel::default();
        let mut s = SimState::standing(&model);
        for j in 0..NUM_JOINTS {
            s.joint_positions[j] += rng.random_range(-0.5..0.5);
            s.joint_velocities[j] = rng.random_range(-2.0..2.0);
        }
        s.base_orientation = UnitQuaternion::from_euler_angles(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-3.0..3.0),
        );
        s.base_angular_velocity = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        s.base_linear_velocity = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        s
    }

    #[test]
    fn mass_matrix_matches_kinetic_energy() {
        let model = RobotModel::default();
        for seed in 0..5 {
            let s = random_state(seed);
            let fr = frames(&model, &s.joint_positions);
            let m = mass_matrix(&model, &fr);
            let v = generalized_velocity(&s);
            let ke_m = 0.5 * v.dot(&(m * v));
            let ke = kinetic_energy_bodies(&model, &s);
            assert!((ke_m - ke).abs() < 1e-12 * ke.max(1.0), "{ke_m} vs {ke}");
            assert!((m - m.transpose()).amax() < 1e-14);
        }
    }

    /// Euler-Lagrange check: C(q, v) = d/dt(M v)|_{a=0} - dT/dq, evaluated by finite differences.
    #[test]
    fn bias_matches_lagrangian_on_joints() {
        let model = RobotModel::default();
        let mut s = random_state(11);
        // fixed base keeps the check in joint coordinates only
        s.base_angular_velocity = Vector3::zeros();
        s.base_linear_velocity = Vector3::zeros();
        let fr = frames(&model, &s.joint_positions);
        let c = bias_forces(&model, &fr, &s, Motion::zero());
        let h = 1e-6;
        let qdot = s.joint_velocities;
        for j in 0..NUM_JOINTS {
            // d/dt (M v)_j along the flow with zero acceleration = sum_k dM_jk/dq_i qdot_i qdot_k
            let mut plus = s.clone();
            let mut minus = s.clone();
            for i in 0..NUM_JOINTS {
                plus.joint_positions[i] += h * qdot[i];
                minus.joint_positions[i] -= h * qdot[i];
            }
            let mp = mass_matrix(&model, &frames(&model, &plus.joint_positions));
            let mm = mass_matrix(&model, &frames(&model, &minus.joint_positions));
            let v = generalized_velocity(&s);
            let dmv = ((mp - mm) * v)[6 + j] / (2.0 * h);
            // dT/dq_j
            let mut pj = s.clone();
            let mut mj = s.clone();
            pj.joint_positions[j] += h;
            mj.joint_positions[j] -= h;
            let tp = 0.5 * v.dot(&(mass_matrix(&model, &frames(&model, &pj.joint_positions)) * v));
            let tm = 0.5 * v.dot(&(mass_matrix(&model, &frames(&model, &mj.joint_positions)) * v));
            let dtdq = (tp - tm) / (2.0 * h);
            let expected = dmv - dtdq;
            assert!((c[6 + j] - expected).abs() < 1e-7, "joint {j}: {} vs {expected}", c[6 + j]);
        }
    }

    #[test]
    fn free_fall_single_step() {
        let model = RobotModel::default();
        let mut s = SimState::standing(&model);
        s.base_position.z = 1.0;
        let (next, report) = step(&model, &s, &[0.0; NUM_JOINTS], &Terrain::flat(0.5), 0.0025).unwrap();
        assert!((next.base_linear_velocity.z + 9.81 * 0.0025).abs() < 1e-12);
        assert!(report.feet.iter().all(|f| !f.in_contact));
    }

    #[test]
    fn foot_jacobian_matches_kinematics() {
        let model = RobotModel::default();
        let s = random_state(5);
        let fk = kinematics::foot_kinematics(&model, &s);
        let fr = frames(&model, &s.joint_positions);
        let rot = *s.base_orientation.to_rotation_matrix().matrix();
        let v = generalized_velocity(&s);
        for leg in 0..NUM_LEGS {
            let jv: Vector3<f64> = point_jacobian(&fr, leg, &fr.foot_base[leg], &rot) * v;
            assert!((jv - fk[leg].velocity).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_dt_and_torque() {
        let model = RobotModel::default();
        let s = SimState::standing(&model);
        let t = Terrain::flat(0.5);
        assert!(matches!(step(&model, &s, &[0.0; 12], &t, 0.0), Err(SimError::InvalidInput(_))));
        let mut tau = [0.0; 12];
        tau[3] = f64::INFINITY;
        assert!(matches!(step(&model, &s, &tau, &t, 0.0025), Err(SimError::InvalidInput(_))));
    }

    #[test]
    fn nan_state_names_body() {
        let model = RobotModel::default();
        let mut s = SimState::standing(&model);
        s.joint_velocities[5] = f64::NAN;
        match step(&model, &s, &[0.0; 12], &Terrain::flat(0.5), 0.0025) {
            Err(SimError::Diverged { body }) => assert_eq!(body, "fore_left.ankle_pitch"),
            other => panic!("{other:?}"),
        }
    }
}
