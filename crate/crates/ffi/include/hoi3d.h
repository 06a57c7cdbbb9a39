/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef HOI3D_H
#define HOI3D_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum Hoi3dStatus {
  HOI3D_STATUS_OK = 0,
  HOI3D_STATUS_NULL_POINTER = 1,
  HOI3D_STATUS_INVALID_ARGUMENT = 2,
  HOI3D_STATUS_UNKNOWN_CATEGORY = 3,
  HOI3D_STATUS_IO = 4,
  HOI3D_STATUS_PARSE = 5,
  HOI3D_STATUS_GEOMETRY = 6,
  HOI3D_STATUS_DIMENSION_MISMATCH = 7,
  HOI3D_STATUS_NUMERIC = 8,
  HOI3D_STATUS_PANIC = 9,
} Hoi3dStatus;

typedef enum Hoi3dClamped {
  HOI3D_CLAMPED_NONE = 0,
  HOI3D_CLAMPED_TO_MIN = 1,
  HOI3D_CLAMPED_TO_MAX = 2,
} Hoi3dClamped;

typedef enum Hoi3dFormat {
  HOI3D_FORMAT_PLY = 0,
  HOI3D_FORMAT_JSON = 1,
} Hoi3dFormat;

typedef enum Hoi3dSemanticMode {
  HOI3D_SEMANTIC_MODE_PER_CLASS_ABS = 0,
  HOI3D_SEMANTIC_MODE_SQUARED = 1,
  HOI3D_SEMANTIC_MODE_VECTOR_L2 = 2,
} Hoi3dSemanticMode;

// Opaque prior table.
typedef struct Hoi3dPriorTable Hoi3dPriorTable;

// Opaque configuration volume.
typedef struct Hoi3dVolume Hoi3dVolume;

typedef struct Hoi3dObjectPrior {
  double ratio;
  double gamma_min;
  double gamma_max;
  bool box_ratio_mode;
} Hoi3dObjectPrior;

typedef struct Hoi3dCamera {
  double focal;
  double cx;
  double cy;
} Hoi3dCamera;

typedef struct Hoi3dBox {
  double u_min;
  double v_min;
  double u_max;
  double v_max;
} Hoi3dBox;

typedef struct Hoi3dSphere {
  double center[3];
  double radius;
  enum Hoi3dClamped clamped;
} Hoi3dSphere;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *hoi3d_last_error(void);

// Library version as a static NUL-terminated string.
const char *hoi3d_version(void);

// The 80-category table compiled into the library.
enum Hoi3dStatus hoi3d_priors_bundled(struct Hoi3dPriorTable **out);

// Load and validate a prior table CSV.
enum Hoi3dStatus hoi3d_priors_load(const char *path, struct Hoi3dPriorTable **out);

void hoi3d_priors_free(struct Hoi3dPriorTable *table);

// Number of categories, or 0 for a null handle.
uintptr_t hoi3d_priors_len(const struct Hoi3dPriorTable *table);

enum Hoi3dStatus hoi3d_priors_lookup(const struct Hoi3dPriorTable *table,
                                     const char *category,
                                     struct Hoi3dObjectPrior *out);

// Sphere center and radius for an object box.
//
// `joints3d` holds 17 camera-frame joints (51 doubles); `z_min`/`z_max` are
// the depth extremes of the recovered body.
enum Hoi3dStatus hoi3d_estimate_sphere(const struct Hoi3dPriorTable *table,
                                       struct Hoi3dCamera camera,
                                       struct Hoi3dBox human_box,
                                       struct Hoi3dBox object_box,
                                       const char *category,
                                       const double *joints3d,
                                       double z_min,
                                       double z_max,
                                       struct Hoi3dSphere *out);

// Build a configuration volume from body vertices (`3 * n_vertices`
// doubles), 17 joints (51 doubles) and a sphere. `gravity` may be null for
// the default camera-frame direction.
enum Hoi3dStatus hoi3d_volume_build(const double *vertices,
                                    uintptr_t n_vertices,
                                    const double *joints3d,
                                    const struct Hoi3dSphere *sphere,
                                    const char *category,
                                    const double *gravity,
                                    uint64_t seed,
                                    struct Hoi3dVolume **out);

void hoi3d_volume_free(struct Hoi3dVolume *volume);

// Number of points, or 0 for a null handle.
uintptr_t hoi3d_volume_len(const struct Hoi3dVolume *volume);

// Copy the points as `x y z` triples; `capacity` counts doubles.
enum Hoi3dStatus hoi3d_volume_points(const struct Hoi3dVolume *volume,
                                     double *out,
                                     uintptr_t capacity);

// Copy the per-point part ids (1..=17 body, 18 object).
enum Hoi3dStatus hoi3d_volume_labels(const struct Hoi3dVolume *volume,
                                     uint8_t *out,
                                     uintptr_t capacity);

enum Hoi3dStatus hoi3d_volume_write(const struct Hoi3dVolume *volume,
                                    const char *path,
                                    enum Hoi3dFormat format);

// Joint attention from a `height x width` attention map and `n_joints`
// `(x, y)` cell coordinates; writes `n_joints` weights.
enum Hoi3dStatus hoi3d_joint_attention(const double *att,
                                       uintptr_t height,
                                       uintptr_t width,
                                       const double *joints_xy,
                                       uintptr_t n_joints,
                                       double *out);

// `sum p ln(p / q)`. `smoothing <= 0` disables smoothing. Gradient buffers
// may be null.
enum Hoi3dStatus hoi3d_kl_divergence(const double *p,
                                     const double *q,
                                     uintptr_t n,
                                     double smoothing,
                                     double *loss,
                                     double *grad_p,
                                     double *grad_q);

enum Hoi3dStatus hoi3d_triplet_loss(const double *anchor,
                                    const double *positive,
                                    const double *negative,
                                    uintptr_t dim,
                                    double margin,
                                    double *loss,
                                    double *grad_anchor,
                                    double *grad_positive,
                                    double *grad_negative);

enum Hoi3dStatus hoi3d_semantic_consistency(const double *s2d,
                                            const double *s3d,
                                            uintptr_t m,
                                            enum Hoi3dSemanticMode mode,
                                            double *loss,
                                            double *grad_s2d,
                                            double *grad_s3d);

enum Hoi3dStatus hoi3d_bce_multilabel(const double *scores,
                                      const double *targets,
                                      uintptr_t m,
                                      double *loss,
                                      double *grad);

// Fused 2D, 3D and final scores; each output holds `m` doubles.
enum Hoi3dStatus hoi3d_fuse_scores(const double *s2d_h,
                                   const double *s2d_o,
                                   const double *s2d_sp,
                                   const double *s3d_h,
                                   const double *s3d_sp,
                                   const double *s_joint,
                                   uintptr_t m,
                                   double *out_s2d,
                                   double *out_s3d,
                                   double *out_total);

// Flags (0/1) for the `ceil(fraction * n)` rows of the `n x d` matrix
// farthest from its mean row.
enum Hoi3dStatus hoi3d_monster_filter(const double *embeddings,
                                      uintptr_t n,
                                      uintptr_t d,
                                      double fraction,
                                      uint8_t *out_flags);

// Similarity alignment of two 17-joint poses given as `(u, v, visible)`
// triples (51 doubles each). Writes the RMS residual and, if `aligned` is
// non-null, the aligned source pose in the same layout.
enum Hoi3dStatus hoi3d_procrustes_align(const double *src,
                                        const double *dst,
                                        double *residual,
                                        double *aligned);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOI3D_H */
