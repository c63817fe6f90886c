use janossy_core::architectures::Encoder;
use janossy_core::collision::{
    find_collision, verify_certificate, BorsukUlamMap, CertificateFile, SearchConfig,
};
use janossy_core::constructions::{sample_obstruction, ObstructionParams};
use janossy_core::geometry::SphereDirection;
use janossy_core::numerics::{Activation, Mlp};
use janossy_core::Error;

fn certified() -> CertificateFile {
    let inst = sample_obstruction(ObstructionParams::new(1, 3, 1, 0.25, 30, 8)).unwrap();
    let members = (0..3)
        .map(|t| Mlp::random(&[1, 5, 1], Activation::Tanh, 40 + t).unwrap())
        .collect();
    let enc = Encoder::indexed(1, 3, 1, members).unwrap();
    let map = BorsukUlamMap::new(&enc, &inst).unwrap();
    let cert = find_collision(&map, &SearchConfig::default())
        .unwrap()
        .certificate
        .unwrap();
    CertificateFile {
        certificate: cert,
        encoder: enc,
    }
}

#[test]
fn round_trip_verifies() {
    let file = certified();
    let text = serde_json::to_string(&file).unwrap();
    let back: CertificateFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back, file);
    let rep = verify_certificate(&back).unwrap();
    assert!(rep.passed);
    assert!(rep.residual_difference <= 1e-12);
}

#[test]
fn tampered_residual_fails() {
    let mut file = certified();
    file.certificate.antipodal_residual += 1e-6;
    assert!(!verify_certificate(&file).unwrap().passed);
}

#[test]
fn swapped_encoder_is_rejected() {
    let mut file = certified();
    let members = (0..3)
        .map(|t| Mlp::random(&[1, 5, 1], Activation::Tanh, 90 + t).unwrap())
        .collect();
    file.encoder = Encoder::indexed(1, 3, 1, members).unwrap();
    assert!(matches!(
        verify_certificate(&file),
        Err(Error::FingerprintMismatch { .. })
    ));
}

#[test]
fn moved_direction_is_rejected() {
    let mut file = certified();
    let u = file.certificate.direction.coords().to_vec();
    file.certificate.direction = SphereDirection::normalize(vec![u[0] + 0.1, u[1]]).unwrap();
    assert!(verify_certificate(&file).is_err());
}

#[test]
fn changed_instance_seed_is_rejected() {
    let mut file = certified();
    file.certificate.instance_params.seed += 1;
    assert!(matches!(
        verify_certificate(&file),
        Err(Error::FingerprintMismatch { .. })
    ));
}
