#[path = "support/gradient_cases.rs"]
mod cases;

#[test]
fn conv1d() {
    cases::conv1d();
}

#[test]
fn batchnorm_train_mode() {
    cases::batchnorm_train_mode();
}

#[test]
fn batchnorm_statistic_gradients() {
    cases::batchnorm_statistic_gradients();
}

#[test]
fn linear() {
    cases::linear();
}

#[test]
fn activations_away_from_kinks() {
    cases::activations_away_from_kinks();
}

#[test]
fn maxpool_away_from_ties() {
    cases::maxpool_away_from_ties();
}

#[test]
fn cross_entropy_hard_and_soft() {
    cases::cross_entropy_hard_and_soft();
}

#[test]
fn shapelet_transform_layer() {
    cases::shapelet_transform_layer();
}

#[test]
fn shapelet_transform_single_window_matches_norm() {
    cases::shapelet_transform_single_window_matches_norm();
}

#[test]
fn whole_network_smooth_architectures() {
    cases::whole_network_smooth_architectures();
}

#[test]
fn whole_teacher_network() {
    cases::whole_teacher_network();
}

#[test]
fn bn_regularizer_input_gradient() {
    cases::bn_regularizer_input_gradient();
}
