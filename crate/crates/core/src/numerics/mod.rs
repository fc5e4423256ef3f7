pub mod interp;
pub mod optimize;
pub mod quad;
pub mod special;
