#pragma once

namespace dnas3d::parallel {

// Worker count used by the OpenMP kernels. Defaults to the OpenMP runtime
// default; 1 disables internal parallelism.
void set_num_threads(int n);
int num_threads();
bool available();

}  // namespace dnas3d::parallel
