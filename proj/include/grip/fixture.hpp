#pragma once

#include <cstdint>
#include <span>

#include "grip/io.hpp"

namespace grip {

/// Deterministic synthetic data with full ground truth, shared by the command
/// layer and the tests. The same seed always yields the same bytes; the seed
/// only varies phases, frequencies, and mounting rotations, never the shape
/// of the data.

/// Quiet standing: T-pose with a gentle frontal-plane arm sway, both feet
/// planted, the body weight split evenly across the insoles.
SequenceData standing_fixture(uint64_t seed, int frames);

/// Walking-like motion: sinusoidal hip/knee/arm swing, heel-to-toe load
/// roll with alternating flight windows, and steady forward drift of the
/// root. The contact labels and force series come from the generated
/// pressure maps, so sensors and truth stay consistent.
SequenceData gait_fixture(uint64_t seed, int frames);

/// Vertical-acceleration pulse train (three jump spikes) plus one copy per
/// planted offset, each delayed by its offset and zero-padded; the undelayed
/// train rides along as the shared reference. Throws DegenerateInput when an
/// offset leaves no pulse overlap.
SyncInput jump_fixture(uint64_t seed, int frames, std::span<const int> planted_offsets);

/// Uncalibrated counterpart of standing_fixture for the calibration command.
/// Timeline: device-on-floor segment (watch/strap only), static T-pose,
/// then the sway motion. Wrist devices are 9-DoF with random vendor frames
/// and mountings; foot insoles are 6-DoF with random mountings. Ground truth
/// and plantar pressure cover the whole timeline. Throws SequenceTooShort
/// below 400 frames.
RawBundle raw_fixture(uint64_t seed, int frames);

}  // namespace grip
