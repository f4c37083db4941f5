pub mod date;
pub mod edition;
pub mod facts;
pub mod latex;
pub mod nei;
pub mod project;
pub mod review;
pub mod terms;
