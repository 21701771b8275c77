#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "imle/envs.hpp"
#include "imle/imle.hpp"
#include "imle/policy.hpp"

namespace imle {

// Checkpoint byte layout (all integers u32, all reals f64, little-endian):
//   "IMLEv1" | kind u8 | activation u8 | n_sizes | layer_sizes[n_sizes]
//   | T_o | T_p | T_a | action_dim | flow_steps
//   | obs_dim | obs_min[obs_dim] | obs_max[obs_dim]
//   | action_dim | act_min[action_dim] | act_max[action_dim]
//   | for each layer k: weights[l_k * l_{k+1}] (row-major) | biases[l_{k+1}]
// See docs/file_formats.md.
std::string SerializeCheckpoint(const Policy& policy);
Policy DeserializeCheckpoint(const std::string& bytes);
void WriteCheckpoint(const std::filesystem::path& path, const Policy& policy);
Policy ReadCheckpoint(const std::filesystem::path& path);

// Raw (unnormalized) demos with their provenance and normalization stats.
struct Dataset {
  std::string task;
  std::string spec_text;  // key=value lines describing the generator
  Horizons horizons;
  std::size_t obs_dim = 0;     // per frame
  std::size_t action_dim = 0;
  Normalizer normalizer;
  std::vector<Demo> demos;
  std::vector<int> episode;  // source episode per demo (toy: demo index)
  std::vector<int> mode;     // mode label per demo

  std::size_t num_episodes() const;
};

// Dataset byte layout: "IMLDv1" | name_len | task | spec_len | spec_text
//   | T_o | T_p | T_a | obs_dim | action_dim | normalizer block (as above)
//   | n_demos | per demo: episode i32 | mode i32 | observation[T_o*obs_dim]
//   | actions[T_p*action_dim]
std::string SerializeDataset(const Dataset& ds);
Dataset DeserializeDataset(const std::string& bytes);
void WriteDataset(const std::filesystem::path& path, const Dataset& ds);
Dataset ReadDataset(const std::filesystem::path& path);

// episode,t,effector_x,effector_y,block_x,block_y,angle,action_x,action_y,mode
void WriteEpisodesCsv(std::ostream& os, const std::vector<Episode>& episodes);

std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace imle
