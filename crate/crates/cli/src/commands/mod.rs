pub mod encode;
pub mod generate;
pub mod gradcheck;
pub mod interpolate;
pub mod roll;
pub mod train;
