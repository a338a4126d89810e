#pragma once

#include "ofr/tensor.hpp"

namespace ofr {

// The learned pipeline runs in double precision; the tensor and flow layers
// stay generic over the scalar.
using Real = double;
using Frame = Tensor<Real>;
using Conv = ConvSpec<Real>;

}  // namespace ofr
