use nalgebra::DVector;

use super::params::Vehicle;

/// Normal load on each wheel (FL, FR, RL, RR) for the body state `x`.
///
/// Each axle carries its static share; roll moves load across it by
/// `(k·(φ − φ_r) + c·φ̇) / track`, positive roll loading the right wheel. The
/// transfer saturates at the axle's static share (wheel lift), which keeps the
/// sum of the four loads equal to `m·g`.
pub fn normal_loads(vehicle: &Vehicle, x: &DVector<f64>, phi_r: f64) -> [f64; 4] {
    let roll = vehicle.kind().roll_index();
    let (phi, phi_dot) = (x[roll], x[roll + 1]);
    let (k_axle, c_axle) = match vehicle {
        Vehicle::GeneralEv(p) => (0.5 * p.k_phi, 0.5 * p.c_phi),
        Vehicle::Vhs(p) => (0.5 * p.k_s * p.l_s * p.l_s, 0.5 * p.b_s * p.l_s * p.l_s),
    };
    let (front, rear) = vehicle.static_axle_loads();
    let (t_f, t_r) = vehicle.tracks();
    let moment = k_axle * (phi - phi_r) + c_axle * phi_dot;
    let df = (moment / t_f).clamp(-front, front);
    let dr = (moment / t_r).clamp(-rear, rear);
    [front - df, front + df, rear - dr, rear + dr]
}
