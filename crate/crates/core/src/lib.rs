pub mod catalog;
pub mod cbmd;
pub mod cli;
pub mod contour;
pub mod error;
pub mod lcu;
pub mod lchs;
pub mod matrixcore;
pub mod par;
pub mod polydecomp;
pub mod series;
pub mod solver;
