# This file makes 'utils' a package.