mod mtx;
mod rmat;

pub use mtx::{parse_matrix_market, read_matrix_market, write_matrix_market, MtxError};
pub use rmat::{rmat_generate, RmatParams};
