#include "rseed/retinex.hpp"

#include <cmath>

namespace rseed {

NodeId reconstruct(Tape& tape, NodeId reflectance, NodeId illumination) {
    return tape.mul(reflectance, illumination);
}

NodeId gamma_transform(Tape& tape, NodeId illumination, NodeId gamma) {
    check_shape(tape.shape(gamma).rank == 0, "gamma must be a scalar node");
    if (tape.value(gamma).data[0] <= 0.0f)
        throw Error("non-positive gamma: " + std::to_string(tape.value(gamma).data[0]));
    return tape.pow_node(illumination, gamma);
}

NodeId enhance_compose(Tape& tape, NodeId reflectance, NodeId illumination, NodeId gamma) {
    return tape.mul(reflectance, gamma_transform(tape, illumination, gamma));
}

Tensor reconstruct(const Tensor& reflectance, const Tensor& illumination) {
    Tape tape;
    return tape.value(
        reconstruct(tape, tape.constant(reflectance), tape.constant(illumination)));
}

Tensor enhance_compose(const Tensor& reflectance, const Tensor& illumination, float gamma) {
    Tape tape;
    return tape.value(enhance_compose(tape, tape.constant(reflectance),
                                      tape.constant(illumination),
                                      tape.constant_scalar(gamma)));
}

} // namespace rseed
