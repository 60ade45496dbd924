//! Incremental Euclidean distance fields over a probabilistic occupancy grid.
//!
//! Sensor frames are ray-cast into a log-odds voxel grid. Voxels that become
//! occupied or free are queued, and each epoch propagates distance changes
//! breadth-first from those voxels only. Every voxel records its closest
//! obstacle, and every obstacle keeps a doubly linked list of the voxels that
//! point at it, so removing an obstacle touches exactly the affected voxels.
//!
//! ```
//! use esdfmap::{EsdfMap, MapConfig, VoxelKey};
//!
//! let mut map = EsdfMap::new(MapConfig::default()).unwrap();
//! for x in 0..6 {
//!     map.set_voxel_state(VoxelKey::new(x, 0, 0), x == 0).unwrap();
//! }
//! map.run_epoch().unwrap();
//! assert_eq!(map.distance_voxels(VoxelKey::new(5, 0, 0)), Some(5.0));
//! ```

pub mod connectivity;
pub mod error;
pub mod esdf;
pub mod index;
pub mod key;
pub mod map;
pub mod occupancy;
pub mod oracle;
pub mod slice;
pub mod store;
pub mod voxel;

pub use connectivity::Connectivity;
pub use error::{Error, Result};
pub use esdf::{EsdfConfig, QueueDiscipline, UpdateRule};
pub use index::{Backend, IndexConfig, MemoryStats, VoxelBox, VoxelIndex};
pub use key::{block_of, BlockKey, BlockOffset, VoxelKey};
pub use map::{DistanceQuery, EpochReport, EsdfMap, MapConfig};
pub use occupancy::{traverse_ray, OccState, OccupancyConfig, Pose, SensorFrame, UpdateQueues};
pub use oracle::{exact_edt, ErrorReport};
pub use slice::{Axis, Slice};
pub use voxel::{Coc, Layer, VoxelInfo};

pub use nalgebra;
