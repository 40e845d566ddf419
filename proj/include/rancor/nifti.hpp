#pragma once

#include <array>
#include <string>

#include "rancor/volume.hpp"

namespace rancor {

struct VolumeHeader {
    Dims dims;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    short datatype_code = 0;
    // sform rows (4x4, row-major); metadata pass-through
    std::array<double, 16> affine{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    std::string description;
};

struct ReadVolume {
    VolumeHeader header;
    bool is_integer = false;      // stored with an integer datatype
    bool is_displacement = false; // dim[0]==5, dim[5]==3, vector intent
    ScalarVolume scalar;          // scalar payload (unset for displacement files)
    DisplacementField disp;       // displacement payload
};

// NIfTI-1 (.nii / .nii.gz), little-endian; uint8/int16/uint16/int32 and
// float32/float64 voxel data, scl_slope/scl_inter applied when slope != 0.
ReadVolume read_volume(const std::string& path);

LabelVolume to_labels(const ReadVolume& rv);
DisplacementField read_displacement(const std::string& path);

// Written as 32-bit float.
void write_scalar(const std::string& path, const ScalarVolume& vol,
                  const VolumeHeader* header = nullptr);

// Written as 16-bit integer.
void write_labels(const std::string& path, const LabelVolume& vol,
                  const VolumeHeader* header = nullptr);

// 32-bit float, dim[0]=5, dim[5]=3, vector intent; components stay in
// voxel units (recorded in the description field).
void write_displacement(const std::string& path, const DisplacementField& disp,
                        const VolumeHeader* header = nullptr);

} // namespace rancor
