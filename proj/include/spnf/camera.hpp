#pragma once

#include <Eigen/Dense>

#include "spnf/errors.hpp"

namespace spnf {

// Pinhole camera. cam_to_world is a rigid transform; the camera looks along -z
// in its own frame, +x right, +y up.
struct Camera {
    int width = 0;
    int height = 0;
    float fx = 0.f, fy = 0.f;
    float cx = 0.f, cy = 0.f;
    Eigen::Matrix4f cam_to_world = Eigen::Matrix4f::Identity();
    float near = 0.f;
    float far = 0.f;

    Eigen::Matrix3f rotation() const { return cam_to_world.topLeftCorner<3, 3>(); }
    Eigen::Vector3f position() const { return cam_to_world.topRightCorner<3, 1>(); }

    void validate() const {
        if (width <= 0 || height <= 0) throw ValidationError("camera: non-positive image size");
        if (fx <= 0.f || fy <= 0.f) throw ValidationError("camera: non-positive focal length");
        if (cx < 0.f || cx >= static_cast<float>(width) || cy < 0.f ||
            cy >= static_cast<float>(height))
            throw ValidationError("camera: principal point outside image");
        if (!(near > 0.f) || !(far > near))
            throw ValidationError("camera: need 0 < near < far");
        Eigen::Matrix3f r = rotation();
        if ((r * r.transpose() - Eigen::Matrix3f::Identity()).cwiseAbs().maxCoeff() > 1e-5f)
            throw ValidationError("camera: rotation block not orthonormal");
    }
};

}  // namespace spnf
